use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hyper::ModelHyperparams;
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::Matrix;
use crate::network::ParamSet;

/// Trainable tensors of one CPSNN layer plus its linear readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Synaptic weights, `hidden x channels`.
    pub w: Matrix,
    /// Warp controller weights, `channels x 2*channels`, acting on `[s_t, z_{t-1}]`.
    pub w_c: Matrix,
    pub b_c: Vec<f64>,
    /// Readout weights, `classes x hidden`.
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
    /// `[lambda_f, lambda_s]`. Held fixed unless training is told otherwise.
    pub mixing: Vec<f64>,
}

impl LayerParams {
    /// Variance-scaled synaptic weights, zero controller weights with a
    /// positive bias (warp close to 1), zero readout.
    pub fn init<R: Rng + ?Sized>(hp: &ModelHyperparams, rng: &mut R) -> Self {
        let c = hp.channels;
        let w = Matrix::random_normal(hp.hidden, c, hp.weight_gain / (c as f64).sqrt(), rng);
        Self {
            w,
            w_c: Matrix::zeros(c, 2 * c),
            b_c: vec![hp.warp_bias_init; c],
            w_out: Matrix::zeros(hp.classes, hp.hidden),
            b_out: vec![0.0; hp.classes],
            mixing: vec![hp.lambda_f, hp.lambda_s],
        }
    }

    /// All-zero tensors with the shapes implied by `hp`.
    pub fn zeros(hp: &ModelHyperparams) -> Self {
        let c = hp.channels;
        Self {
            w: Matrix::zeros(hp.hidden, c),
            w_c: Matrix::zeros(c, 2 * c),
            b_c: vec![0.0; c],
            w_out: Matrix::zeros(hp.classes, hp.hidden),
            b_out: vec![0.0; hp.classes],
            mixing: vec![hp.lambda_f, hp.lambda_s],
        }
    }

    pub fn lambda_f(&self) -> f64 {
        self.mixing[0]
    }

    pub fn lambda_s(&self) -> f64 {
        self.mixing[1]
    }

    pub fn check_shapes(&self, hp: &ModelHyperparams) -> Result<()> {
        let (c, h, k) = (hp.channels, hp.hidden, hp.classes);
        let checks = [
            ("w", self.w.rows * self.w.cols, h * c, self.w.rows == h),
            ("w_c", self.w_c.rows * self.w_c.cols, 2 * c * c, self.w_c.rows == c),
            ("b_c", self.b_c.len(), c, true),
            ("w_out", self.w_out.rows * self.w_out.cols, k * h, self.w_out.rows == k),
            ("b_out", self.b_out.len(), k, true),
            ("mixing", self.mixing.len(), 2, true),
        ];
        for (what, found, expected, rows_ok) in checks {
            if found != expected || !rows_ok {
                return Err(Error::Shape { what, expected, found });
            }
        }
        for (name, t) in self.tensors() {
            ensure_finite(t, name, None)?;
        }
        Ok(())
    }
}

impl ParamSet for LayerParams {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("w", &self.w.data),
            ("w_c", &self.w_c.data),
            ("b_c", &self.b_c),
            ("w_out", &self.w_out.data),
            ("b_out", &self.b_out),
            ("mixing", &self.mixing),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w", &mut self.w.data),
            ("w_c", &mut self.w_c.data),
            ("b_c", &mut self.b_c),
            ("w_out", &mut self.w_out.data),
            ("b_out", &mut self.b_out),
            ("mixing", &mut self.mixing),
        ]
    }

    fn frozen(&self) -> &'static [&'static str] {
        &["mixing"]
    }
}

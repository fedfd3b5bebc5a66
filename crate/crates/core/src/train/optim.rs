use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ParamSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global l2 norm the averaged batch gradient is clipped to.
    pub clip_norm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Let the optimiser update the trace mixing coefficients.
    pub train_mixing: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 1.0,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            train_mixing: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::Config("epsilon and clip_norm must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Rescales every tensor by `clip_norm / g` when the global norm `g` exceeds
/// `clip_norm`. Returns the norm before clipping.
pub fn clip_gradients<P: ParamSet>(grads: &mut P, clip_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > clip_norm {
        grads.scale(clip_norm / norm);
    }
    norm
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P) -> Self {
        let zeros = || params.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self { m: zeros(), v: zeros() }
    }
}

/// One bias-corrected Adam update. `step` counts from 1.
pub fn adam_step<P: ParamSet>(params: &mut P, grads: &P, state: &mut AdamState, cfg: &TrainingConfig, step: u64) {
    assert!(step >= 1, "Adam steps are counted from 1");
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    let g_all = grads.tensors();
    for (ti, (_, p)) in params.tensors_mut().into_iter().enumerate() {
        let g = g_all[ti].1;
        let (m, v) = (&mut state.m[ti], &mut state.v[ti]);
        for j in 0..p.len() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

//! Comparison models: a plain LIF network with fixed membrane decay, and one
//! whose per-neuron decay is gated by the current input.
//!
//! Both share the readout, loss and training loop with the CPSNN.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{check_sequence, readout, spike_value, ForwardOutput, ModelHyperparams, Rows};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{logit, sigmoid, Matrix};
use crate::network::{ModelKind, Network, ParamSet};
use crate::sequence::SpikeSequence;
use crate::train::{l2, readout_backward, spike_reset_backward, Backward};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSnnParams {
    /// `hidden x channels`.
    pub w: Matrix,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSnnParams {
    pub w: Matrix,
    /// Decay controller input weights, `hidden x channels`.
    pub u: Matrix,
    /// Decay controller bias, `hidden`.
    pub a: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

fn init_w<R: Rng + ?Sized>(hp: &ModelHyperparams, rng: &mut R) -> Matrix {
    Matrix::random_normal(hp.hidden, hp.channels, hp.weight_gain / (hp.channels as f64).sqrt(), rng)
}

fn shape_err(what: &'static str, expected: usize, found: usize) -> Error {
    Error::Shape { what, expected, found }
}

fn check_common(w: &Matrix, w_out: &Matrix, b_out: &[f64], hp: &ModelHyperparams) -> Result<()> {
    if w.rows != hp.hidden || w.cols != hp.channels {
        return Err(shape_err("w", hp.hidden * hp.channels, w.rows * w.cols));
    }
    if w_out.rows != hp.classes || w_out.cols != hp.hidden {
        return Err(shape_err("w_out", hp.classes * hp.hidden, w_out.rows * w_out.cols));
    }
    if b_out.len() != hp.classes {
        return Err(shape_err("b_out", hp.classes, b_out.len()));
    }
    ensure_finite(&w.data, "w", None)?;
    ensure_finite(&w_out.data, "w_out", None)?;
    ensure_finite(b_out, "b_out", None)
}

impl FixedSnnParams {
    pub fn init<R: Rng + ?Sized>(hp: &ModelHyperparams, rng: &mut R) -> Self {
        Self {
            w: init_w(hp, rng),
            w_out: Matrix::zeros(hp.classes, hp.hidden),
            b_out: vec![0.0; hp.classes],
        }
    }

    pub fn check_shapes(&self, hp: &ModelHyperparams) -> Result<()> {
        check_common(&self.w, &self.w_out, &self.b_out, hp)
    }
}

impl AdaptiveSnnParams {
    /// Zero controller weights and bias `logit(alpha_m)`, so the untrained
    /// model starts as the fixed-decay network.
    pub fn init<R: Rng + ?Sized>(hp: &ModelHyperparams, rng: &mut R) -> Self {
        Self {
            w: init_w(hp, rng),
            u: Matrix::zeros(hp.hidden, hp.channels),
            a: vec![logit(hp.alpha_m); hp.hidden],
            w_out: Matrix::zeros(hp.classes, hp.hidden),
            b_out: vec![0.0; hp.classes],
        }
    }

    pub fn check_shapes(&self, hp: &ModelHyperparams) -> Result<()> {
        check_common(&self.w, &self.w_out, &self.b_out, hp)?;
        if self.u.rows != hp.hidden || self.u.cols != hp.channels {
            return Err(shape_err("u", hp.hidden * hp.channels, self.u.rows * self.u.cols));
        }
        if self.a.len() != hp.hidden {
            return Err(shape_err("a", hp.hidden, self.a.len()));
        }
        ensure_finite(&self.u.data, "u", None)?;
        ensure_finite(&self.a, "a", None)
    }
}

impl ParamSet for FixedSnnParams {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![("w", &self.w.data), ("w_out", &self.w_out.data), ("b_out", &self.b_out)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w", &mut self.w.data),
            ("w_out", &mut self.w_out.data),
            ("b_out", &mut self.b_out),
        ]
    }
}

impl ParamSet for AdaptiveSnnParams {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("w", &self.w.data),
            ("u", &self.u.data),
            ("a", &self.a),
            ("w_out", &self.w_out.data),
            ("b_out", &self.b_out),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w", &mut self.w.data),
            ("u", &mut self.u.data),
            ("a", &mut self.a),
            ("w_out", &mut self.w_out.data),
            ("b_out", &mut self.b_out),
        ]
    }
}

/// Recorded LIF run of either baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTape {
    pub s: Rows,
    pub current: Rows,
    /// Per-neuron decay used at each step (constant for the fixed model).
    pub alpha: Rows,
    pub v_pre: Rows,
    pub v: Rows,
    pub spikes: Rows,
    pub rates: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Membrane update rule of a baseline.
enum Decay<'a> {
    Fixed,
    Adaptive { u: &'a Matrix, a: &'a [f64] },
}

fn lif_forward(
    seq: &SpikeSequence,
    w: &Matrix,
    decay: Decay<'_>,
    w_out: &Matrix,
    b_out: &[f64],
    hp: &ModelHyperparams,
    record: bool,
) -> Result<ForwardOutput<BaselineTape>> {
    check_sequence(seq, hp)?;
    let (c, h, steps) = (hp.channels, hp.hidden, seq.horizon());
    let mut s = vec![0.0; c];
    let mut current = vec![0.0; h];
    let mut alpha = vec![hp.alpha_m; h];
    let mut v = vec![0.0; h];
    let mut v_pre = vec![0.0; h];
    let mut spikes = vec![0.0; h];
    let mut rates = vec![0.0; h];
    let mut tape = record.then(|| BaselineTape {
        s: Rows::with_capacity(c, steps),
        current: Rows::with_capacity(h, steps),
        alpha: Rows::with_capacity(h, steps),
        v_pre: Rows::with_capacity(h, steps),
        v: Rows::with_capacity(h, steps),
        spikes: Rows::with_capacity(h, steps),
        rates: Vec::new(),
        logits: Vec::new(),
    });
    let scaled = !(hp.unscaled_input && matches!(decay, Decay::Adaptive { .. }));

    for i in 0..steps {
        seq.row_f64_into(i, &mut s);
        w.matvec_into(&s, &mut current);
        ensure_finite(&current, "synaptic current", Some(i + 1))?;
        if let Decay::Adaptive { u, a } = &decay {
            u.matvec_into(&s, &mut alpha);
            for (al, b) in alpha.iter_mut().zip(a.iter()) {
                *al = sigmoid(*al + b);
            }
        }
        for k in 0..h {
            let input = if scaled { (1.0 - alpha[k]) * current[k] } else { current[k] };
            v_pre[k] = alpha[k] * v[k] + input;
            let sp = spike_value(v_pre[k], hp.theta, hp.surrogate_width, hp.spike_mode);
            spikes[k] = sp;
            v[k] = (1.0 - sp) * v_pre[k];
            rates[k] += sp;
        }
        if let Some(t) = tape.as_mut() {
            t.s.push(&s);
            t.current.push(&current);
            t.alpha.push(&alpha);
            t.v_pre.push(&v_pre);
            t.v.push(&v);
            t.spikes.push(&spikes);
        }
    }
    let inv = 1.0 / steps as f64;
    rates.iter_mut().for_each(|r| *r *= inv);
    let logits = readout(w_out, b_out, &rates);
    if let Some(t) = tape.as_mut() {
        t.rates = rates.clone();
        t.logits = logits.clone();
    }
    Ok(ForwardOutput { rates, logits, tape })
}

/// Gradients of one baseline run. `du`/`da` are filled only for the adaptive model.
struct LifGrads<'a> {
    w: &'a mut Matrix,
    u: Option<&'a mut Matrix>,
    a: Option<&'a mut [f64]>,
}

fn lif_backward(
    tape: &BaselineTape,
    drates: &[f64],
    adaptive: bool,
    hp: &ModelHyperparams,
    mut g: LifGrads<'_>,
) -> Result<Vec<f64>> {
    let steps = tape.s.len();
    let h = hp.hidden;
    let ds_direct: Vec<f64> = drates.iter().map(|d| d / steps as f64).collect();
    let scaled = !(hp.unscaled_input && adaptive);
    let mut dv = vec![0.0; h];
    let mut di = vec![0.0; h];
    let mut dpre_gate = vec![0.0; h];
    let mut norms = vec![0.0; steps];
    let zeros = vec![0.0; h];

    for i in (0..steps).rev() {
        norms[i] = l2(&[&dv]);
        let (s, current, alpha) = (tape.s.row(i), tape.current.row(i), tape.alpha.row(i));
        let (v_pre, spikes) = (tape.v_pre.row(i), tape.spikes.row(i));
        let v_prev = if i == 0 { &zeros[..] } else { tape.v.row(i - 1) };
        for k in 0..h {
            let dvp = spike_reset_backward(dv[k], ds_direct[k], v_pre[k], spikes[k], hp);
            if !dvp.is_finite() {
                return Err(Error::NonFinite {
                    what: "membrane adjoint",
                    step: Some(i + 1),
                });
            }
            di[k] = if scaled { (1.0 - alpha[k]) * dvp } else { dvp };
            if adaptive {
                // v_pre = alpha v_prev + (1 - alpha) I
                let dalpha = dvp * (v_prev[k] - if scaled { current[k] } else { 0.0 });
                dpre_gate[k] = dalpha * alpha[k] * (1.0 - alpha[k]);
            }
            dv[k] = alpha[k] * dvp;
        }
        g.w.add_outer(&di, s);
        if let (Some(du), Some(da)) = (g.u.as_deref_mut(), g.a.as_deref_mut()) {
            du.add_outer(&dpre_gate, s);
            for (d, x) in da.iter_mut().zip(&dpre_gate) {
                *d += x;
            }
        }
    }
    Ok(norms)
}

impl Network for FixedSnnParams {
    type Tape = BaselineTape;
    const KIND: ModelKind = ModelKind::SnnFixed;

    fn init<R: Rng + ?Sized>(hp: &ModelHyperparams, rng: &mut R) -> Self {
        FixedSnnParams::init(hp, rng)
    }

    fn check_shapes(&self, hp: &ModelHyperparams) -> Result<()> {
        FixedSnnParams::check_shapes(self, hp)
    }

    fn run(&self, seq: &SpikeSequence, hp: &ModelHyperparams, record: bool) -> Result<ForwardOutput<BaselineTape>> {
        self.check_shapes(hp)?;
        lif_forward(seq, &self.w, Decay::Fixed, &self.w_out, &self.b_out, hp, record)
    }

    fn backward(&self, tape: &BaselineTape, label: usize, hp: &ModelHyperparams) -> Result<Backward<Self>> {
        let mut g = self.zeros_like();
        let (loss, drates) = readout_backward(&self.w_out, &tape.rates, &tape.logits, label, &mut g.w_out, &mut g.b_out)?;
        let norms = lif_backward(
            tape,
            &drates,
            false,
            hp,
            LifGrads { w: &mut g.w, u: None, a: None },
        )?;
        Ok(Backward {
            loss,
            grads: g,
            state_adjoint_norms: norms,
        })
    }
}

impl Network for AdaptiveSnnParams {
    type Tape = BaselineTape;
    const KIND: ModelKind = ModelKind::SnnAdaptive;

    fn init<R: Rng + ?Sized>(hp: &ModelHyperparams, rng: &mut R) -> Self {
        AdaptiveSnnParams::init(hp, rng)
    }

    fn check_shapes(&self, hp: &ModelHyperparams) -> Result<()> {
        AdaptiveSnnParams::check_shapes(self, hp)
    }

    fn run(&self, seq: &SpikeSequence, hp: &ModelHyperparams, record: bool) -> Result<ForwardOutput<BaselineTape>> {
        self.check_shapes(hp)?;
        let decay = Decay::Adaptive { u: &self.u, a: &self.a };
        lif_forward(seq, &self.w, decay, &self.w_out, &self.b_out, hp, record)
    }

    fn backward(&self, tape: &BaselineTape, label: usize, hp: &ModelHyperparams) -> Result<Backward<Self>> {
        let mut g = self.zeros_like();
        let (loss, drates) = readout_backward(&self.w_out, &tape.rates, &tape.logits, label, &mut g.w_out, &mut g.b_out)?;
        let norms = lif_backward(
            tape,
            &drates,
            true,
            hp,
            LifGrads {
                w: &mut g.w,
                u: Some(&mut g.u),
                a: Some(&mut g.a),
            },
        )?;
        Ok(Backward {
            loss,
            grads: g,
            state_adjoint_norms: norms,
        })
    }
}

/// Forward pass of the fixed-decay baseline: `I_t = W s_t`, no synaptic traces.
pub fn fixed_snn_forward(
    seq: &SpikeSequence,
    params: &FixedSnnParams,
    hp: &ModelHyperparams,
    record_tape: bool,
) -> Result<ForwardOutput<BaselineTape>> {
    params.run(seq, hp, record_tape)
}

/// Forward pass of the adaptive baseline:
/// `alpha_t = sigmoid(a + U s_t)`, `v_t = alpha_t v_{t-1} + (1 - alpha_t) W s_t`.
pub fn adaptive_snn_forward(
    seq: &SpikeSequence,
    params: &AdaptiveSnnParams,
    hp: &ModelHyperparams,
    record_tape: bool,
) -> Result<ForwardOutput<BaselineTape>> {
    params.run(seq, hp, record_tape)
}

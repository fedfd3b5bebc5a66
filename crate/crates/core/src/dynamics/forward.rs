//! Sequence-level forward pass, the BPTT tape, and constant-memory streaming.

use super::hyper::ModelHyperparams;
use super::ops::{fast_trace_into, fire_and_reset, mixed_input_into, slow_trace_into, warp_into};
use super::params::LayerParams;
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::sequence::SpikeSequence;

/// Fixed-width rows appended one timestep at a time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rows {
    width: usize,
    data: Vec<f64>,
}

impl Rows {
    pub fn with_capacity(width: usize, rows: usize) -> Self {
        Self {
            width,
            data: Vec::with_capacity(width * rows),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.width);
        self.data.extend_from_slice(row);
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn len(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width.max(1))
    }
}

/// Per-sequence mutable state of a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    pub z: Vec<f64>,
    /// Number of steps taken.
    pub t: usize,
}

impl LayerState {
    pub fn new(hp: &ModelHyperparams) -> Self {
        Self {
            v: vec![0.0; hp.hidden],
            f: vec![0.0; hp.channels],
            z: vec![0.0; hp.channels],
            t: 0,
        }
    }

    pub fn reset(&mut self) {
        self.v.fill(0.0);
        self.f.fill(0.0);
        self.z.fill(0.0);
        self.t = 0;
    }

    /// Bytes held by the live state vectors and step counter.
    pub fn state_bytes(&self) -> usize {
        (self.v.len() + self.f.len() + self.z.len()) * std::mem::size_of::<f64>() + std::mem::size_of::<usize>()
    }

    fn check(&self, hp: &ModelHyperparams) -> Result<()> {
        ensure_len(&self.v, hp.hidden, "membrane state")?;
        ensure_len(&self.f, hp.channels, "fast trace state")?;
        ensure_len(&self.z, hp.channels, "slow trace state")
    }
}

/// Scratch vectors reused by every step.
#[derive(Debug, Clone)]
pub(crate) struct StepBuffers {
    pub s: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub gate: Vec<f64>,
    pub omega: Vec<f64>,
    pub decay: Vec<f64>,
    pub u: Vec<f64>,
    pub current: Vec<f64>,
    pub v_pre: Vec<f64>,
    pub spikes: Vec<f64>,
}

impl StepBuffers {
    pub fn new(hp: &ModelHyperparams) -> Self {
        let (c, h) = (hp.channels, hp.hidden);
        Self {
            s: vec![0.0; c],
            z_prev: vec![0.0; c],
            gate: vec![0.0; c],
            omega: vec![0.0; c],
            decay: vec![0.0; c],
            u: vec![0.0; c],
            current: vec![0.0; h],
            v_pre: vec![0.0; h],
            spikes: vec![0.0; h],
        }
    }

    fn bytes(&self) -> usize {
        let n = self.s.len() * 6 + self.current.len() * 3;
        n * std::mem::size_of::<f64>()
    }
}

/// Advances `state` by one step with input `buf.s`, leaving the step's
/// intermediate values in `buf`.
pub(crate) fn advance(state: &mut LayerState, params: &LayerParams, hp: &ModelHyperparams, buf: &mut StepBuffers) {
    fast_trace_into(&mut state.f, &buf.s, hp.alpha_f);
    buf.z_prev.copy_from_slice(&state.z);
    warp_into(
        &buf.s,
        &buf.z_prev,
        &params.w_c,
        &params.b_c,
        hp.omega_floor,
        hp.ablation,
        &mut buf.gate,
        &mut buf.omega,
    );
    slow_trace_into(&mut state.z, &buf.s, &buf.omega, hp.alpha_s.ln(), &mut buf.decay);
    mixed_input_into(
        &buf.s,
        &state.f,
        &state.z,
        params.lambda_f(),
        params.lambda_s(),
        hp,
        &mut buf.u,
    );
    params.w.matvec_into(&buf.u, &mut buf.current);
    let a = hp.alpha_m;
    for i in 0..state.v.len() {
        buf.v_pre[i] = a * state.v[i] + (1.0 - a) * buf.current[i];
    }
    fire_and_reset(
        &buf.v_pre,
        hp.theta,
        hp.surrogate_width,
        hp.spike_mode,
        &mut buf.spikes,
        &mut state.v,
    );
    state.t += 1;
}

/// Everything recorded during a forward pass that reverse-mode replay needs.
/// Row `i` holds step `t = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    pub s: Rows,
    pub f: Rows,
    pub z_prev: Rows,
    pub z: Rows,
    pub omega: Rows,
    /// Sigmoid output of the controller, before the floor is applied.
    pub gate: Rows,
    /// Per-channel decay `alpha_s^omega`.
    pub decay: Rows,
    pub current: Rows,
    pub v_pre: Rows,
    pub v: Rows,
    pub spikes: Rows,
    pub rates: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Tape {
    fn new(hp: &ModelHyperparams, steps: usize) -> Self {
        let (c, h) = (hp.channels, hp.hidden);
        let rc = || Rows::with_capacity(c, steps);
        let rh = || Rows::with_capacity(h, steps);
        Self {
            s: rc(),
            f: rc(),
            z_prev: rc(),
            z: rc(),
            omega: rc(),
            gate: rc(),
            decay: rc(),
            current: rh(),
            v_pre: rh(),
            v: rh(),
            spikes: rh(),
            rates: Vec::new(),
            logits: Vec::new(),
        }
    }

    fn record(&mut self, state: &LayerState, buf: &StepBuffers) {
        self.s.push(&buf.s);
        self.f.push(&state.f);
        self.z_prev.push(&buf.z_prev);
        self.z.push(&state.z);
        self.omega.push(&buf.omega);
        self.gate.push(&buf.gate);
        self.decay.push(&buf.decay);
        self.current.push(&buf.current);
        self.v_pre.push(&buf.v_pre);
        self.v.push(&state.v);
        self.spikes.push(&buf.spikes);
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Mean warp factor over all steps and channels.
    pub fn mean_omega(&self) -> f64 {
        let (sum, n) = self
            .omega
            .iter()
            .flat_map(|r| r.iter())
            .fold((0.0, 0usize), |(s, n), w| (s + w, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    /// Time-averaged hidden spikes.
    pub rates: Vec<f64>,
    pub logits: Vec<f64>,
    pub tape: Option<T>,
}

/// `logits = W_out rates + b_out`.
pub(crate) fn readout(w_out: &crate::linalg::Matrix, b_out: &[f64], rates: &[f64]) -> Vec<f64> {
    let mut logits = w_out.matvec(rates);
    for (l, b) in logits.iter_mut().zip(b_out) {
        *l += b;
    }
    logits
}

pub(crate) fn check_sequence(seq: &SpikeSequence, hp: &ModelHyperparams) -> Result<()> {
    if seq.horizon() == 0 {
        return Err(Error::Contract("empty spike sequence".into()));
    }
    if seq.channels() != hp.channels {
        return Err(Error::Shape {
            what: "sequence channels",
            expected: hp.channels,
            found: seq.channels(),
        });
    }
    Ok(())
}

/// Runs the layer over a whole sequence from the zero state.
///
/// Each step updates the fast trace, computes the warp from `[s_t, z_{t-1}]`,
/// updates the slow trace, forms the synaptic current, integrates the
/// membrane, spikes and resets. Rates are the mean hidden spike vector.
pub fn forward_sequence(
    seq: &SpikeSequence,
    params: &LayerParams,
    hp: &ModelHyperparams,
    record_tape: bool,
) -> Result<ForwardOutput<Tape>> {
    check_sequence(seq, hp)?;
    params.check_shapes(hp)?;
    let steps = seq.horizon();
    let mut state = LayerState::new(hp);
    let mut buf = StepBuffers::new(hp);
    let mut tape = record_tape.then(|| Tape::new(hp, steps));
    let mut rates = vec![0.0; hp.hidden];
    for i in 0..steps {
        seq.row_f64_into(i, &mut buf.s);
        advance(&mut state, params, hp, &mut buf);
        ensure_finite(&buf.current, "synaptic current", Some(i + 1))?;
        for (r, s) in rates.iter_mut().zip(&buf.spikes) {
            *r += s;
        }
        if let Some(tape) = tape.as_mut() {
            tape.record(&state, &buf);
        }
    }
    let inv = 1.0 / steps as f64;
    rates.iter_mut().for_each(|r| *r *= inv);
    let logits = readout(&params.w_out, &params.b_out, &rates);
    if let Some(tape) = tape.as_mut() {
        tape.rates = rates.clone();
        tape.logits = logits.clone();
    }
    Ok(ForwardOutput { rates, logits, tape })
}

/// One in-place step with no history retained. Returns the hidden spikes.
pub fn streaming_step(
    state: &mut LayerState,
    s: &[f64],
    params: &LayerParams,
    hp: &ModelHyperparams,
) -> Result<Vec<f64>> {
    state.check(hp)?;
    ensure_len(s, hp.channels, "spike vector")?;
    let mut buf = StepBuffers::new(hp);
    buf.s.copy_from_slice(s);
    advance(state, params, hp, &mut buf);
    ensure_finite(&buf.current, "synaptic current", Some(state.t))?;
    Ok(buf.spikes)
}

/// A layer driven one step at a time with preallocated scratch space, for
/// unbounded input streams.
pub struct Streamer<'a> {
    params: &'a LayerParams,
    hp: &'a ModelHyperparams,
    pub state: LayerState,
    buf: StepBuffers,
}

impl<'a> Streamer<'a> {
    pub fn new(params: &'a LayerParams, hp: &'a ModelHyperparams) -> Result<Self> {
        params.check_shapes(hp)?;
        Ok(Self {
            params,
            hp,
            state: LayerState::new(hp),
            buf: StepBuffers::new(hp),
        })
    }

    pub fn step(&mut self, s: &[f64]) -> &[f64] {
        self.buf.s.copy_from_slice(s);
        advance(&mut self.state, self.params, self.hp, &mut self.buf);
        &self.buf.spikes
    }

    /// Warp factors of the most recent step.
    pub fn omega(&self) -> &[f64] {
        &self.buf.omega
    }

    /// Live state plus scratch, counted analytically from vector lengths.
    pub fn state_bytes(&self) -> usize {
        self.state.state_bytes() + self.buf.bytes()
    }
}

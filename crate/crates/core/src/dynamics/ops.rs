//! Single-timestep building blocks of a CPSNN layer.
//!
//! The public functions validate their inputs and allocate; the `*_into`
//! variants are the unchecked kernels used by the sequence loop.

use super::hyper::{Ablation, ModelHyperparams};
use super::params::LayerParams;
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::linalg::{sigmoid, Matrix};

/// `f = alpha_f * f_prev + s`.
pub fn fast_trace_update(f_prev: &[f64], s: &[f64], alpha_f: f64) -> Result<Vec<f64>> {
    ensure_len(s, f_prev.len(), "spike vector")?;
    ensure_finite(f_prev, "fast trace", None)?;
    ensure_finite(s, "spike vector", None)?;
    let mut f = f_prev.to_vec();
    fast_trace_into(&mut f, s, alpha_f);
    Ok(f)
}

#[inline]
pub(crate) fn fast_trace_into(f: &mut [f64], s: &[f64], alpha_f: f64) {
    for (fi, si) in f.iter_mut().zip(s) {
        *fi = alpha_f * *fi + si;
    }
}

/// Warp factor `omega = sigmoid(W_c [s, z_prev] + b_c)` per channel, lifted to
/// `floor + (1 - floor) * sigmoid(..)` when `hp.omega_floor > 0`. Returns all
/// ones under the no-warp ablation.
pub fn warp_factor(
    s: &[f64],
    z_prev: &[f64],
    w_c: &Matrix,
    b_c: &[f64],
    hp: &ModelHyperparams,
) -> Result<Vec<f64>> {
    let c = b_c.len();
    ensure_len(s, c, "spike vector")?;
    ensure_len(z_prev, c, "slow trace")?;
    if w_c.rows != c || w_c.cols != 2 * c {
        return Err(Error::Shape {
            what: "warp controller weights",
            expected: 2 * c * c,
            found: w_c.rows * w_c.cols,
        });
    }
    ensure_finite(z_prev, "slow trace", None)?;
    let mut gate = vec![0.0; c];
    let mut omega = vec![0.0; c];
    warp_into(s, z_prev, w_c, b_c, hp.omega_floor, hp.ablation, &mut gate, &mut omega);
    Ok(omega)
}

/// Writes the sigmoid gate and the resulting warp. `gate` is left untouched
/// under the no-warp ablation.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn warp_into(
    s: &[f64],
    z_prev: &[f64],
    w_c: &Matrix,
    b_c: &[f64],
    floor: f64,
    ablation: Ablation,
    gate: &mut [f64],
    omega: &mut [f64],
) {
    if !ablation.uses_warp() {
        omega.fill(1.0);
        gate.fill(1.0);
        return;
    }
    let c = b_c.len();
    for i in 0..c {
        let row = w_c.row(i);
        let mut g = b_c[i];
        for j in 0..c {
            g += row[j] * s[j] + row[c + j] * z_prev[j];
        }
        let sg = sigmoid(g);
        gate[i] = sg;
        omega[i] = floor + (1.0 - floor) * sg;
    }
}

/// `z = alpha_s^omega * z_prev + s`, with the power evaluated as
/// `exp(omega * ln alpha_s)`.
pub fn slow_trace_update(z_prev: &[f64], s: &[f64], omega: &[f64], alpha_s: f64) -> Result<Vec<f64>> {
    ensure_len(s, z_prev.len(), "spike vector")?;
    ensure_len(omega, z_prev.len(), "warp factor")?;
    if !(alpha_s > 0.0 && alpha_s < 1.0) {
        return Err(Error::Contract(format!("alpha_s must lie in (0, 1), got {alpha_s}")));
    }
    if let Some(w) = omega.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
        return Err(Error::Contract(format!("warp factor {w} outside (0, 1]")));
    }
    ensure_finite(z_prev, "slow trace", None)?;
    let mut z = z_prev.to_vec();
    let mut decay = vec![0.0; z.len()];
    slow_trace_into(&mut z, s, omega, alpha_s.ln(), &mut decay);
    Ok(z)
}

/// Updates `z` in place and stores the per-channel decay `alpha_s^omega`.
#[inline]
pub(crate) fn slow_trace_into(z: &mut [f64], s: &[f64], omega: &[f64], ln_alpha_s: f64, decay: &mut [f64]) {
    for i in 0..z.len() {
        let d = (omega[i] * ln_alpha_s).exp();
        decay[i] = d;
        z[i] = d * z[i] + s[i];
    }
}

/// `I = W s + lambda_f W f + lambda_s W z`, with ablated terms dropped.
pub fn synaptic_current(
    s: &[f64],
    f: &[f64],
    z: &[f64],
    params: &LayerParams,
    hp: &ModelHyperparams,
) -> Result<Vec<f64>> {
    let c = params.w.cols;
    ensure_len(s, c, "spike vector")?;
    ensure_len(f, c, "fast trace")?;
    ensure_len(z, c, "slow trace")?;
    ensure_finite(f, "fast trace", None)?;
    ensure_finite(z, "slow trace", None)?;
    let mut u = vec![0.0; c];
    mixed_input_into(s, f, z, params.lambda_f(), params.lambda_s(), hp, &mut u);
    Ok(params.w.matvec(&u))
}

/// `u = s + lambda_f f + lambda_s z`, so that `I = W u`.
#[inline]
pub(crate) fn mixed_input_into(
    s: &[f64],
    f: &[f64],
    z: &[f64],
    lambda_f: f64,
    lambda_s: f64,
    hp: &ModelHyperparams,
    u: &mut [f64],
) {
    let lf = if hp.fast_on() { lambda_f } else { 0.0 };
    let ls = if hp.slow_on() { lambda_s } else { 0.0 };
    for i in 0..u.len() {
        u[i] = s[i] + lf * f[i] + ls * z[i];
    }
}

/// One leaky integrate-and-fire update with strict threshold and hard reset.
/// Returns the post-reset potential and the binary spike vector.
pub fn membrane_step(v_prev: &[f64], current: &[f64], alpha_m: f64, theta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len(current, v_prev.len(), "synaptic current")?;
    ensure_finite(current, "synaptic current", None)?;
    if !(alpha_m > 0.0 && alpha_m < 1.0) || !(theta > 0.0) {
        return Err(Error::Contract(format!(
            "membrane_step needs alpha_m in (0, 1) and theta > 0, got {alpha_m}, {theta}"
        )));
    }
    let mut v = v_prev.to_vec();
    let mut v_pre = vec![0.0; v.len()];
    let mut spikes = vec![0.0; v.len()];
    for i in 0..v.len() {
        v_pre[i] = alpha_m * v[i] + (1.0 - alpha_m) * current[i];
    }
    fire_and_reset(&v_pre, theta, 1.0, super::SpikeMode::Hard, &mut spikes, &mut v);
    Ok((v, spikes))
}

/// Spike generation and reset from the pre-reset potential.
#[inline]
pub(crate) fn fire_and_reset(
    v_pre: &[f64],
    theta: f64,
    width: f64,
    mode: super::SpikeMode,
    spikes: &mut [f64],
    v: &mut [f64],
) {
    for i in 0..v_pre.len() {
        let s = spike_value(v_pre[i], theta, width, mode);
        spikes[i] = s;
        v[i] = (1.0 - s) * v_pre[i];
    }
}

#[inline]
pub(crate) fn spike_value(v: f64, theta: f64, width: f64, mode: super::SpikeMode) -> f64 {
    match mode {
        super::SpikeMode::Hard => {
            if v > theta {
                1.0
            } else {
                0.0
            }
        }
        super::SpikeMode::Soft => sigmoid((v - theta) / width),
    }
}

//! Reverse-mode BPTT through a recorded CPSNN tape.

use super::surrogate::spike_grad;
use crate::dynamics::{LayerParams, ModelHyperparams, ResetGrad, Rows, Tape};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::ParamSet;

/// Loss, parameter gradients and the per-step adjoint magnitude of the
/// recurrent state.
#[derive(Debug, Clone)]
pub struct Backward<P> {
    pub loss: f64,
    pub grads: P,
    /// `||dL/d state_t||_2` for every step, where the state is the post-reset
    /// membrane plus (for CPSNN) both synaptic traces.
    pub state_adjoint_norms: Vec<f64>,
}

/// Per-step adjoints of a CPSNN backward pass, kept for analysis.
#[derive(Debug, Clone)]
pub struct AdjointTrace {
    /// `dL/dv_t` of the post-reset membrane.
    pub v: Rows,
    /// Total `dL/df_t`.
    pub f: Rows,
    /// Total `dL/dz_t`.
    pub z: Rows,
    /// `dL/du_t` for the mixed input `u_t = s_t + lambda_f f_t + lambda_s z_t`.
    pub u: Rows,
}

/// Softmax cross-entropy. Returns the loss and `d loss / d logits`.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Gradients of the readout and `dL/d rates`.
pub(crate) fn readout_backward(
    w_out: &Matrix,
    rates: &[f64],
    logits: &[f64],
    label: usize,
    dw_out: &mut Matrix,
    db_out: &mut [f64],
) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Contract(format!("label {label} out of range for {} classes", logits.len())));
    }
    let (loss, dlogits) = cross_entropy(logits, label);
    dw_out.add_outer(&dlogits, rates);
    for (d, g) in db_out.iter_mut().zip(&dlogits) {
        *d += g;
    }
    let mut drates = vec![0.0; rates.len()];
    w_out.matvec_t_acc(&dlogits, &mut drates);
    Ok((loss, drates))
}

/// Adjoint of the pre-reset potential for one neuron, given the adjoint of
/// the post-reset potential `dv` and the direct spike adjoint `ds`.
#[inline]
pub(crate) fn spike_reset_backward(dv: f64, ds_direct: f64, v_pre: f64, spike: f64, hp: &ModelHyperparams) -> f64 {
    // v = (1 - s) v_pre
    let ds = match hp.reset_grad {
        ResetGrad::Surrogate => ds_direct - dv * v_pre,
        ResetGrad::Detach => ds_direct,
    };
    dv * (1.0 - spike) + ds * spike_grad(v_pre, hp)
}

pub(crate) fn l2(parts: &[&[f64]]) -> f64 {
    parts.iter().flat_map(|p| p.iter()).map(|x| x * x).sum::<f64>().sqrt()
}

/// Exact reverse-mode derivatives of the cross-entropy of a recorded run.
///
/// Gradients flow through the readout, the rate average, spike generation
/// (surrogate or soft derivative), the reset gate, the membrane recurrence,
/// the synaptic current, both trace recurrences and the warp controller.
pub fn backward_sequence(
    tape: &Tape,
    label: usize,
    params: &LayerParams,
    hp: &ModelHyperparams,
) -> Result<Backward<LayerParams>> {
    backward_impl(tape, label, params, hp, None)
}

/// As [`backward_sequence`], also returning every per-step adjoint.
pub fn backward_with_adjoints(
    tape: &Tape,
    label: usize,
    params: &LayerParams,
    hp: &ModelHyperparams,
) -> Result<(Backward<LayerParams>, AdjointTrace)> {
    let (c, h) = (hp.channels, hp.hidden);
    let n = tape.len();
    let mut trace = AdjointTrace {
        v: Rows::with_capacity(h, n),
        f: Rows::with_capacity(c, n),
        z: Rows::with_capacity(c, n),
        u: Rows::with_capacity(c, n),
    };
    let bw = backward_impl(tape, label, params, hp, Some(&mut trace))?;
    // Recorded in reverse; flip into time order.
    for rows in [&mut trace.v, &mut trace.f, &mut trace.z, &mut trace.u] {
        let w = rows.width();
        let mut flipped = Rows::with_capacity(w, n);
        for i in (0..rows.len()).rev() {
            flipped.push(rows.row(i));
        }
        *rows = flipped;
    }
    Ok((bw, trace))
}

fn backward_impl(
    tape: &Tape,
    label: usize,
    params: &LayerParams,
    hp: &ModelHyperparams,
    mut trace: Option<&mut AdjointTrace>,
) -> Result<Backward<LayerParams>> {
    let steps = tape.len();
    if steps == 0 || tape.logits.len() != hp.classes {
        return Err(Error::Contract("backward needs a complete tape".into()));
    }
    let (c, h) = (hp.channels, hp.hidden);
    let mut g = params.zeros_like();
    let (loss, drates) = readout_backward(&params.w_out, &tape.rates, &tape.logits, label, &mut g.w_out, &mut g.b_out)?;
    let ds_direct: Vec<f64> = drates.iter().map(|d| d / steps as f64).collect();

    let lf = if hp.fast_on() { params.lambda_f() } else { 0.0 };
    let ls = if hp.slow_on() { params.lambda_s() } else { 0.0 };
    let ln_alpha_s = hp.alpha_s.ln();
    let warp = hp.ablation.uses_warp();
    let floor = hp.omega_floor;

    let mut dv = vec![0.0; h];
    let mut df = vec![0.0; c];
    let mut dz = vec![0.0; c];
    let mut dv_pre = vec![0.0; h];
    let mut di = vec![0.0; h];
    let mut du = vec![0.0; c];
    let mut u = vec![0.0; c];
    let mut dg = vec![0.0; c];
    let mut x = vec![0.0; 2 * c];
    let mut dx = vec![0.0; 2 * c];
    let mut norms = vec![0.0; steps];
    let (mut dlf, mut dls) = (0.0, 0.0);

    for i in (0..steps).rev() {
        let (s, f, z, z_prev) = (tape.s.row(i), tape.f.row(i), tape.z.row(i), tape.z_prev.row(i));
        let (v_pre, spikes) = (tape.v_pre.row(i), tape.spikes.row(i));

        for k in 0..h {
            dv_pre[k] = spike_reset_backward(dv[k], ds_direct[k], v_pre[k], spikes[k], hp);
            di[k] = (1.0 - hp.alpha_m) * dv_pre[k];
        }
        if !dv_pre.iter().all(|d| d.is_finite()) {
            return Err(Error::NonFinite {
                what: "membrane adjoint",
                step: Some(i + 1),
            });
        }
        for k in 0..c {
            u[k] = s[k] + lf * f[k] + ls * z[k];
        }
        g.w.add_outer(&di, &u);
        du.fill(0.0);
        params.w.matvec_t_acc(&di, &mut du);
        for k in 0..c {
            dlf += du[k] * f[k];
            dls += du[k] * z[k];
            df[k] += lf * du[k];
            dz[k] += ls * du[k];
        }
        norms[i] = l2(&[&dv, &df, &dz]);
        if let Some(tr) = trace.as_deref_mut() {
            tr.v.push(&dv);
            tr.f.push(&df);
            tr.z.push(&dz);
            tr.u.push(&du);
        }

        // z_t = alpha_s^omega_t z_{t-1} + s_t
        let decay = tape.decay.row(i);
        if warp {
            let gate = tape.gate.row(i);
            for k in 0..c {
                let domega = dz[k] * z_prev[k] * decay[k] * ln_alpha_s;
                dg[k] = domega * (1.0 - floor) * gate[k] * (1.0 - gate[k]);
            }
            x[..c].copy_from_slice(s);
            x[c..].copy_from_slice(z_prev);
            g.w_c.add_outer(&dg, &x);
            for (b, d) in g.b_c.iter_mut().zip(&dg) {
                *b += d;
            }
            dx.fill(0.0);
            params.w_c.matvec_t_acc(&dg, &mut dx);
        }
        for k in 0..c {
            dz[k] *= decay[k];
            if warp {
                dz[k] += dx[c + k];
            }
            df[k] *= hp.alpha_f;
        }
        for k in 0..h {
            dv[k] = hp.alpha_m * dv_pre[k];
        }
    }
    g.mixing[0] = if hp.fast_on() { dlf } else { 0.0 };
    g.mixing[1] = if hp.slow_on() { dls } else { 0.0 };

    for (name, t) in g.tensors() {
        if !t.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: name, step: None });
        }
    }
    Ok(Backward {
        loss,
        grads: g,
        state_adjoint_norms: norms,
    })
}

//! Central finite-difference oracle for BPTT gradients.
//!
//! Only the forward loss is evaluated here, so the check is independent of
//! the reverse-mode code it validates. Use it with `SpikeMode::Soft`; the
//! hard threshold makes the loss piecewise constant in most parameters.

use crate::dynamics::ModelHyperparams;
use crate::error::Result;
use crate::network::Network;
use crate::sequence::SpikeSequence;

/// Worst disagreement found, with its location.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tensor: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Difference quotient used by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(L(x+h) - L(x-h)) / 2h`, second-order accurate.
    Central,
    /// Richardson extrapolation of central differences at `h` and `h/2`,
    /// fourth-order accurate. Allows a larger `h` and hence a lower
    /// round-off floor for small gradients.
    Richardson,
}

fn central<N: Network>(probe: &mut N, ti: usize, j: usize, orig: f64, h: f64, seq: &SpikeSequence, hp: &ModelHyperparams) -> Result<f64> {
    probe.tensors_mut()[ti].1[j] = orig + h;
    let plus = probe.loss(seq, hp)?;
    probe.tensors_mut()[ti].1[j] = orig - h;
    let minus = probe.loss(seq, hp)?;
    probe.tensors_mut()[ti].1[j] = orig;
    Ok((plus - minus) / (2.0 * h))
}

/// Finite-difference derivative of the loss with respect to every scalar parameter.
pub fn numeric_gradients<N: Network>(
    model: &N,
    seq: &SpikeSequence,
    hp: &ModelHyperparams,
    h: f64,
    stencil: Stencil,
) -> Result<N> {
    let mut grads = model.zeros_like();
    let mut probe = model.clone();
    let shapes: Vec<usize> = model.tensors().iter().map(|(_, t)| t.len()).collect();
    for (ti, len) in shapes.into_iter().enumerate() {
        for j in 0..len {
            let orig = model.tensors()[ti].1[j];
            let d = match stencil {
                Stencil::Central => central(&mut probe, ti, j, orig, h, seq, hp)?,
                Stencil::Richardson => {
                    let coarse = central(&mut probe, ti, j, orig, h, seq, hp)?;
                    let fine = central(&mut probe, ti, j, orig, h / 2.0, seq, hp)?;
                    (4.0 * fine - coarse) / 3.0
                }
            };
            grads.tensors_mut()[ti].1[j] = d;
        }
    }
    Ok(grads)
}

/// Compares BPTT gradients against finite differences with step `h`.
pub fn check_gradients<N: Network>(
    model: &N,
    seq: &SpikeSequence,
    hp: &ModelHyperparams,
    h: f64,
    stencil: Stencil,
) -> Result<GradCheckReport> {
    let out = model.run(seq, hp, true)?;
    let tape = out.tape.expect("tape requested");
    let analytic = model.backward(&tape, seq.label, hp)?.grads;
    let numeric = numeric_gradients(model, seq, hp, h, stencil)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        tensor: "",
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for ((name, a), (_, n)) in analytic.tensors().into_iter().zip(numeric.tensors()) {
        for (j, (&x, &y)) in a.iter().zip(n).enumerate() {
            report.checked += 1;
            let e = relative_error(x, y);
            if e > report.max_rel_error || report.tensor.is_empty() {
                report = GradCheckReport {
                    max_rel_error: e,
                    tensor: name,
                    index: j,
                    analytic: x,
                    numeric: y,
                    checked: report.checked,
                };
            }
        }
    }
    Ok(report)
}

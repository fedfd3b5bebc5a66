use crate::dynamics::{ModelHyperparams, SpikeMode};
use crate::linalg::sigmoid;

/// Triangular surrogate for the derivative of the Heaviside spike:
/// `max(0, 1 - |v - theta| / width) / width`. Unit area, peak `1 / width`.
#[inline]
pub fn surrogate_derivative(v: f64, theta: f64, width: f64) -> f64 {
    (1.0 - (v - theta).abs() / width).max(0.0) / width
}

/// Local derivative of the spike output with respect to the pre-reset
/// potential, matching the forward spike mode.
#[inline]
pub(crate) fn spike_grad(v_pre: f64, hp: &ModelHyperparams) -> f64 {
    match hp.spike_mode {
        SpikeMode::Hard => surrogate_derivative(v_pre, hp.theta, hp.surrogate_width),
        SpikeMode::Soft => {
            let s = sigmoid((v_pre - hp.theta) / hp.surrogate_width);
            s * (1.0 - s) / hp.surrogate_width
        }
    }
}

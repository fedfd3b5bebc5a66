//! Run-time checks of the state bounds that hold for binary inputs.

use serde::Serialize;

use crate::dynamics::{LayerParams, ModelHyperparams, Tape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub max_f: f64,
    /// `1 / (1 - alpha_f)`.
    pub f_bound: f64,
    /// `max_t max_c (z_t - (t + 1))`; never positive when the linear bound holds.
    pub z_linear_excess: f64,
    pub max_z: f64,
    /// `1 / (1 - alpha_s^omega_min)` when the warp is floored.
    pub z_floor_bound: Option<f64>,
    pub max_current: f64,
    /// `||W||_inf (1 + lambda_f / (1 - alpha_f) + lambda_s max_z)`.
    pub current_bound: f64,
}

impl BoundsReport {
    pub fn fast_ok(&self) -> bool {
        self.max_f <= self.f_bound + 1e-9
    }

    pub fn linear_ok(&self) -> bool {
        self.z_linear_excess <= 1e-9
    }

    pub fn floor_ok(&self) -> bool {
        self.z_floor_bound.is_none_or(|b| self.max_z <= b + 1e-6)
    }

    pub fn current_ok(&self) -> bool {
        self.max_current <= self.current_bound * (1.0 + 1e-12)
    }

    pub fn all_ok(&self) -> bool {
        self.fast_ok() && self.linear_ok() && self.floor_ok() && self.current_ok()
    }
}

/// Measures the recorded run of a CPSNN layer against its analytic bounds.
pub fn check_bounds(tape: &Tape, params: &LayerParams, hp: &ModelHyperparams) -> Result<BoundsReport> {
    if tape.is_empty() {
        return Err(Error::Contract("bounds need a non-empty tape".into()));
    }
    let max_of = |rows: &crate::dynamics::Rows| rows.iter().flatten().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let max_f = max_of(&tape.f);
    let max_z = max_of(&tape.z);
    let z_linear_excess = tape
        .z
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&z| z - (i + 2) as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let max_current = tape.current.iter().flatten().fold(0.0f64, |m, &x| m.max(x.abs()));
    let w_inf = (0..params.w.rows)
        .map(|r| params.w.row(r).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let current_bound = w_inf * (1.0 + params.lambda_f().abs() / (1.0 - hp.alpha_f) + params.lambda_s().abs() * max_z);
    Ok(BoundsReport {
        max_f,
        f_bound: 1.0 / (1.0 - hp.alpha_f),
        z_linear_excess,
        max_z,
        z_floor_bound: (hp.omega_floor > 0.0).then(|| 1.0 / (1.0 - hp.alpha_s.powf(hp.omega_floor))),
        max_current,
        current_bound,
    })
}

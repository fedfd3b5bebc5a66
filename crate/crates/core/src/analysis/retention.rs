//! A warp schedule that behaves exactly like fixed decay for the first `L`
//! steps and then slows the clock so that a spike from step 0 keeps weight
//! at least `epsilon` beyond the lag where fixed decay has forgotten it.

use serde::Serialize;

use super::kernel::{kernel_matrix, WarpSchedule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionSchedule {
    pub schedule: WarpSchedule,
    pub alpha_s: f64,
    pub window: usize,
    pub epsilon: f64,
    /// Warp factor applied after the matching window.
    pub omega_bar: f64,
    /// `ln(epsilon) / ln(alpha_s)`: the lag at which fixed decay reaches `epsilon`.
    pub fixed_horizon: f64,
}

/// Builds the schedule `omega_j = 1` for `j <= L`, `omega_j = omega_bar` after.
///
/// The schedule has length `T = max(2L, floor(H) + 2)` with
/// `H = ln(epsilon) / ln(alpha_s)`, and
/// `omega_bar = (H - L) / (T - L)`, so the weight of a step-0 spike falls to
/// exactly `epsilon` at lag `T` and stays above it before that.
pub fn construct_retention_schedule(alpha_s: f64, window: usize, epsilon: f64) -> Result<RetentionSchedule> {
    if !(alpha_s > 0.0 && alpha_s < 1.0) {
        return Err(Error::Contract(format!("alpha_s must lie in (0, 1), got {alpha_s}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Contract(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if window == 0 {
        return Err(Error::Contract("the matching window must be at least one step".into()));
    }
    let horizon = epsilon.ln() / alpha_s.ln();
    if horizon <= window as f64 {
        return Err(Error::Contract(format!(
            "infeasible: fixed decay {alpha_s} already falls to {:.6} < epsilon = {epsilon} within the \
             {window}-step matching window (it crosses epsilon at lag {horizon:.3}); no warp factor in (0, 1] \
             after the window can restore the lost weight",
            alpha_s.powi(window as i32)
        )));
    }
    let len = (2 * window).max(horizon.floor() as usize + 2);
    let omega_bar = (horizon - window as f64) / (len - window) as f64;
    let mut omega = vec![1.0; window];
    omega.extend(std::iter::repeat_n(omega_bar, len - window));
    Ok(RetentionSchedule {
        schedule: WarpSchedule::new(omega)?,
        alpha_s,
        window,
        epsilon,
        omega_bar,
        fixed_horizon: horizon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionReport {
    /// `max_{lag <= L} |kappa[lag][0] - alpha_s^lag|`.
    pub max_local_deviation: f64,
    pub local_ok: bool,
    /// First lag beyond `L` where fixed decay is below `epsilon` but the warped kernel is not.
    pub retention_lag: Option<usize>,
    pub kappa_at_lag: Option<f64>,
    pub fixed_at_lag: Option<f64>,
    pub retention_ok: bool,
}

impl RetentionReport {
    pub fn passed(&self) -> bool {
        self.local_ok && self.retention_ok
    }
}

/// Evaluates both conditions directly on the kernel of `plan.schedule`.
pub fn verify_retention(plan: &RetentionSchedule) -> Result<RetentionReport> {
    let kappa = kernel_matrix(&plan.schedule, plan.alpha_s)?;
    let max_local_deviation = (0..=plan.window.min(kappa.horizon()))
        .map(|lag| (kappa.get(lag, 0) - plan.alpha_s.powi(lag as i32)).abs())
        .fold(0.0, f64::max);
    let hit = (plan.window + 1..=kappa.horizon()).find(|&lag| {
        let fixed = plan.alpha_s.powi(lag as i32);
        fixed < plan.epsilon && kappa.get(lag, 0) >= plan.epsilon
    });
    Ok(RetentionReport {
        max_local_deviation,
        local_ok: max_local_deviation <= 1e-6,
        retention_lag: hit,
        kappa_at_lag: hit.map(|l| kappa.get(l, 0)),
        fixed_at_lag: hit.map(|l| plan.alpha_s.powi(l as i32)),
        retention_ok: hit.is_some(),
    })
}

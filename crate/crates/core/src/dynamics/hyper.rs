use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which mechanism of the ChronoPlastic synapse is switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// Warp pinned to 1: the slow trace decays at the fixed base rate.
    NoWarp,
    /// Slow-trace term removed from the synaptic current.
    NoSlow,
    /// Fast-trace term removed from the synaptic current.
    NoFast,
}

impl Ablation {
    pub fn uses_warp(self) -> bool {
        !matches!(self, Ablation::NoWarp)
    }
}

/// How the spike nonlinearity is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeMode {
    /// Heaviside forward, triangular surrogate backward.
    #[default]
    Hard,
    /// `sigmoid((v - theta) / width)` in both directions. Smooth, so finite
    /// differences are meaningful.
    Soft,
}

/// Backward treatment of the reset `v <- (1 - s) v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetGrad {
    /// Differentiate through the spike in the reset gate as well.
    #[default]
    Surrogate,
    /// Treat the reset gate as a constant.
    Detach,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelHyperparams {
    /// Membrane decay.
    pub alpha_m: f64,
    /// Fast-trace decay.
    pub alpha_f: f64,
    /// Base decay of the slow trace, exponentiated by the warp factor.
    pub alpha_s: f64,
    /// Initial fast mixing coefficient.
    pub lambda_f: f64,
    /// Initial slow mixing coefficient.
    pub lambda_s: f64,
    pub theta: f64,
    pub surrogate_width: f64,
    pub channels: usize,
    pub hidden: usize,
    pub classes: usize,
    pub ablation: Ablation,
    pub spike_mode: SpikeMode,
    pub reset_grad: ResetGrad,
    /// Lower bound of the warp factor: `omega = floor + (1 - floor) * sigmoid(g)`.
    pub omega_floor: f64,
    /// Adaptive baseline only: drop the `(1 - alpha_t)` input scaling.
    pub unscaled_input: bool,
    /// Synaptic weights start as `N(0, weight_gain^2 / channels)`.
    pub weight_gain: f64,
    /// Initial warp-controller bias; `sigmoid(4) ~ 0.982`.
    pub warp_bias_init: f64,
}

impl Default for ModelHyperparams {
    fn default() -> Self {
        Self {
            alpha_m: 0.9,
            alpha_f: 0.9,
            alpha_s: 0.995,
            lambda_f: 0.5,
            lambda_s: 0.5,
            theta: 1.0,
            surrogate_width: 1.0,
            channels: 8,
            hidden: 64,
            classes: 2,
            ablation: Ablation::Full,
            spike_mode: SpikeMode::Hard,
            reset_grad: ResetGrad::Surrogate,
            omega_floor: 0.0,
            unscaled_input: false,
            weight_gain: 20.0,
            warp_bias_init: 4.0,
        }
    }
}

fn unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie strictly inside (0, 1), got {v}")))
    }
}

impl ModelHyperparams {
    pub fn validate(&self) -> Result<()> {
        unit_open("alpha_m", self.alpha_m)?;
        unit_open("alpha_f", self.alpha_f)?;
        unit_open("alpha_s", self.alpha_s)?;
        if self.alpha_f >= self.alpha_s {
            return Err(Error::Config(format!(
                "alpha_f ({}) must be below alpha_s ({})",
                self.alpha_f, self.alpha_s
            )));
        }
        if !(self.lambda_f >= 0.0 && self.lambda_s >= 0.0) {
            return Err(Error::Config("mixing coefficients must be non-negative".into()));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.surrogate_width > 0.0 && self.surrogate_width.is_finite()) {
            return Err(Error::Config("surrogate_width must be positive".into()));
        }
        if self.channels == 0 || self.hidden == 0 || self.classes == 0 {
            return Err(Error::Config("channels, hidden and classes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.omega_floor) {
            return Err(Error::Config(format!("omega_floor must lie in [0, 1), got {}", self.omega_floor)));
        }
        if !(self.weight_gain >= 0.0 && self.weight_gain.is_finite() && self.warp_bias_init.is_finite()) {
            return Err(Error::Config("initialisation settings must be finite".into()));
        }
        Ok(())
    }

    /// Effective fast mixing coefficient given the ablation.
    pub(crate) fn fast_on(&self) -> bool {
        self.ablation != Ablation::NoFast
    }

    pub(crate) fn slow_on(&self) -> bool {
        self.ablation != Ablation::NoSlow
    }
}

//! The memory kernel induced by a warp schedule on the slow trace.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Per-step warp factors `omega_1..omega_T`, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpSchedule {
    omega: Vec<f64>,
}

impl WarpSchedule {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        ensure_finite(&omega, "warp schedule", None)?;
        if let Some((j, w)) = omega.iter().enumerate().find(|(_, &w)| !(w > 0.0 && w <= 1.0)) {
            return Err(Error::Contract(format!("warp factor {w} at step {} outside (0, 1]", j + 1)));
        }
        Ok(Self { omega })
    }

    pub fn constant(value: f64, horizon: usize) -> Result<Self> {
        Self::new(vec![value; horizon])
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Warp factor of step `j`, 1-based.
    pub fn at(&self, j: usize) -> f64 {
        self.omega[j - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega
    }

    /// `max - min` of the factors.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .omega
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        if self.omega.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// `kappa[t][k] = alpha_s^(omega_{k+1} + ... + omega_t)` for `0 <= k <= t <= T`.
///
/// Entries are evaluated on demand from prefix sums of the schedule, so the
/// matrix costs `O(T)` memory.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    alpha_s: f64,
    ln_alpha_s: f64,
    prefix: Vec<f64>,
}

impl KernelMatrix {
    /// Largest valid time index `T`.
    pub fn horizon(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn alpha_s(&self) -> f64 {
        self.alpha_s
    }

    /// `kappa[t][k]`; zero above the diagonal.
    pub fn get(&self, t: usize, k: usize) -> f64 {
        if k > t {
            return 0.0;
        }
        (self.ln_alpha_s * (self.prefix[t] - self.prefix[k])).exp()
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        (0..=t).map(|k| self.get(t, k)).collect()
    }

    /// Full `(T+1) x (T+1)` lower-triangular matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.horizon() + 1;
        (0..n).map(|t| (0..n).map(|k| self.get(t, k)).collect()).collect()
    }
}

fn check_alpha(alpha_s: f64) -> Result<()> {
    if alpha_s > 0.0 && alpha_s < 1.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!("alpha_s must lie in (0, 1), got {alpha_s}")))
    }
}

pub fn kernel_matrix(schedule: &WarpSchedule, alpha_s: f64) -> Result<KernelMatrix> {
    check_alpha(alpha_s)?;
    let mut prefix = Vec::with_capacity(schedule.len() + 1);
    let mut acc = 0.0;
    prefix.push(acc);
    for &w in schedule.as_slice() {
        acc += w;
        prefix.push(acc);
    }
    Ok(KernelMatrix {
        alpha_s,
        ln_alpha_s: alpha_s.ln(),
        prefix,
    })
}

/// `tau_eff(k, t) = omega_{k+1} + ... + omega_t`, summed directly.
pub fn effective_time(schedule: &WarpSchedule, k: usize, t: usize) -> Result<f64> {
    if k > t || t > schedule.len() {
        return Err(Error::Contract(format!(
            "effective time needs k <= t <= {}, got k = {k}, t = {t}",
            schedule.len()
        )));
    }
    Ok(schedule.as_slice()[k..t].iter().sum())
}

/// Runs `z_t = alpha_s^omega_t z_{t-1} + s_t` from `z_0 = 0` and returns the
/// largest gap to the unrolled sum `sum_{k<=t} kappa[t][k] s_k`.
///
/// `input[i]` is `s_{i+1}`.
pub fn verify_trace_expansion(input: &[f64], schedule: &WarpSchedule, alpha_s: f64) -> Result<f64> {
    if input.len() != schedule.len() {
        return Err(Error::Shape {
            what: "trace input",
            expected: schedule.len(),
            found: input.len(),
        });
    }
    let kappa = kernel_matrix(schedule, alpha_s)?;
    let ln_a = alpha_s.ln();
    let spikes: Vec<usize> = (1..=input.len()).filter(|&k| input[k - 1] != 0.0).collect();
    let mut z = 0.0;
    let mut worst = 0.0f64;
    for t in 1..=input.len() {
        z = (schedule.at(t) * ln_a).exp() * z + input[t - 1];
        let unrolled: f64 = spikes
            .iter()
            .take_while(|&&k| k <= t)
            .map(|&k| kappa.get(t, k) * input[k - 1])
            .sum();
        worst = worst.max((z - unrolled).abs());
    }
    Ok(worst)
}

/// Two windows of equal length whose kernel weights differ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonstationarityWitness {
    pub lag: usize,
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub kappa_first: f64,
    pub kappa_second: f64,
}

impl NonstationarityWitness {
    pub fn difference(&self) -> f64 {
        (self.kappa_first - self.kappa_second).abs()
    }

    /// The fixed decays `a` with `a^lag` equal to each weight. They differ,
    /// so no stationary kernel reproduces both.
    pub fn implied_decays(&self) -> (f64, f64) {
        let inv = 1.0 / self.lag as f64;
        (self.kappa_first.powf(inv), self.kappa_second.powf(inv))
    }
}

/// Searches every lag for the pair of equal-length windows with the largest
/// kernel difference. `None` iff the schedule is constant to within `1e-12`.
pub fn check_nonstationarity(schedule: &WarpSchedule, alpha_s: f64) -> Result<Option<NonstationarityWitness>> {
    check_alpha(alpha_s)?;
    if schedule.len() < 2 {
        return Err(Error::Contract("non-stationarity needs at least two steps".into()));
    }
    if schedule.spread() <= 1e-12 {
        return Ok(None);
    }
    let kappa = kernel_matrix(schedule, alpha_s)?;
    let n = schedule.len();
    let mut best: Option<NonstationarityWitness> = None;
    for lag in 1..n {
        // Windows (k, k + lag] for k = 0..=n-lag; extreme sums give extreme weights.
        let (mut lo, mut hi) = (0, 0);
        for k in 0..=n - lag {
            let w = kappa.get(k + lag, k);
            if w < kappa.get(lo + lag, lo) {
                lo = k;
            }
            if w > kappa.get(hi + lag, hi) {
                hi = k;
            }
        }
        let (a, b) = (kappa.get(hi + lag, hi), kappa.get(lo + lag, lo));
        if best.as_ref().is_none_or(|w| a - b > w.difference()) {
            best = Some(NonstationarityWitness {
                lag,
                first: (hi + lag, hi),
                second: (lo + lag, lo),
                kappa_first: a,
                kappa_second: b,
            });
        }
    }
    Ok(best)
}

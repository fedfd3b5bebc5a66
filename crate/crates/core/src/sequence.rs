//! Labelled binary spike rasters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions and channels of the two informative cues of a temporal XOR sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueMeta {
    pub t1: usize,
    pub t2: usize,
    pub a: usize,
    pub b: usize,
}

impl CueMeta {
    pub fn gap(&self) -> usize {
        self.t2 - self.t1
    }
}

/// A `T x C` binary raster with a class label. Row `i` is the input at step `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeSequence {
    horizon: usize,
    channels: usize,
    spikes: Vec<u8>,
    pub label: usize,
    pub meta: Option<CueMeta>,
}

impl SpikeSequence {
    pub fn zeros(horizon: usize, channels: usize, label: usize) -> Self {
        Self {
            horizon,
            channels,
            spikes: vec![0; horizon * channels],
            label,
            meta: None,
        }
    }

    pub fn from_events(
        horizon: usize,
        channels: usize,
        events: &[(usize, usize)],
        label: usize,
        meta: Option<CueMeta>,
    ) -> Result<Self> {
        let mut seq = Self::zeros(horizon, channels, label);
        for &(t, c) in events {
            if t >= horizon || c >= channels {
                return Err(Error::Contract(format!(
                    "event ({t}, {c}) outside a {horizon}x{channels} raster"
                )));
            }
            seq.set(t, c, true);
        }
        if let Some(m) = meta {
            if !(m.t1 < m.t2 && m.t2 < horizon && m.a < channels && m.b < channels) {
                return Err(Error::Contract(format!("inconsistent cue metadata {m:?}")));
            }
        }
        seq.meta = meta;
        Ok(seq)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize) -> bool {
        self.spikes[t * self.channels + c] != 0
    }

    #[inline]
    pub fn set(&mut self, t: usize, c: usize, on: bool) {
        self.spikes[t * self.channels + c] = u8::from(on);
    }

    pub fn row(&self, t: usize) -> &[u8] {
        &self.spikes[t * self.channels..(t + 1) * self.channels]
    }

    /// Row `t` as 0.0 / 1.0 values.
    pub fn row_f64_into(&self, t: usize, out: &mut [f64]) {
        for (o, &b) in out.iter_mut().zip(self.row(t)) {
            *o = f64::from(b);
        }
    }

    /// Active cells in time-major order.
    pub fn events(&self) -> Vec<(usize, usize)> {
        (0..self.horizon)
            .flat_map(|t| (0..self.channels).map(move |c| (t, c)))
            .filter(|&(t, c)| self.get(t, c))
            .collect()
    }

    pub fn spike_count(&self) -> usize {
        self.spikes.iter().map(|&b| b as usize).sum()
    }

    /// Channel `c` over time as 0.0 / 1.0.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        (0..self.horizon).map(|t| f64::from(u8::from(self.get(t, c)))).collect()
    }
}

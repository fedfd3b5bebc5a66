//! Gradient-flow profiles and streaming cost measurements.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::dynamics::{LayerParams, ModelHyperparams, Streamer};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::stream_rng;
use crate::sequence::SpikeSequence;

/// Per-step `l2` norm of the loss adjoint of the recurrent state: membrane,
/// fast and slow traces for the CPSNN, membrane only for the baselines.
/// Entry `i` belongs to step `i + 1`.
pub fn gradient_flow_profile<N: Network>(model: &N, seq: &SpikeSequence, hp: &ModelHyperparams) -> Result<Vec<f64>> {
    let tape = model.run(seq, hp, true)?.tape.expect("tape requested");
    Ok(model.backward(&tape, seq.label, hp)?.state_adjoint_norms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalePoint {
    pub horizon: usize,
    pub hidden: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub horizon: usize,
    pub hidden: usize,
    pub channels: usize,
    /// Fastest of the repeated runs, in seconds.
    pub wall_time: f64,
    pub state_bytes: usize,
}

/// Input rows are drawn once and cycled so the timing covers only the dynamics.
const INPUT_PERIOD: usize = 1024;

/// Streams random input through freshly initialised layers and records the
/// fastest wall time of `repeats` runs and the analytic state size.
pub fn scaling_probe(
    grid: &[ScalePoint],
    base: &ModelHyperparams,
    input_rate: f64,
    repeats: usize,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if grid.is_empty() || repeats == 0 {
        return Err(Error::Contract("scaling probe needs a grid point and at least one repeat".into()));
    }
    if !(0.0..=1.0).contains(&input_rate) {
        return Err(Error::Contract(format!("input rate {input_rate} outside [0, 1]")));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for (gi, p) in grid.iter().enumerate() {
        let hp = ModelHyperparams {
            hidden: p.hidden,
            channels: p.channels,
            ..base.clone()
        };
        hp.validate()?;
        let mut rng = stream_rng(seed, gi as u64);
        let params = LayerParams::init(&hp, &mut rng);
        let inputs: Vec<Vec<f64>> = (0..INPUT_PERIOD)
            .map(|_| (0..p.channels).map(|_| f64::from(u8::from(rng.random_bool(input_rate)))).collect())
            .collect();
        let mut best = f64::INFINITY;
        let mut bytes = 0;
        for _ in 0..repeats {
            let mut streamer = Streamer::new(&params, &hp)?;
            let start = Instant::now();
            let mut fired = 0.0;
            for t in 0..p.horizon {
                fired += streamer.step(&inputs[t % INPUT_PERIOD]).iter().sum::<f64>();
            }
            std::hint::black_box(fired);
            best = best.min(start.elapsed().as_secs_f64());
            bytes = streamer.state_bytes();
        }
        rows.push(ScalingRow {
            horizon: p.horizon,
            hidden: p.hidden,
            channels: p.channels,
            wall_time: best,
            state_bytes: bytes,
        });
    }
    Ok(rows)
}

pub fn write_scaling_csv<W: std::io::Write>(rows: &[ScalingRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_size_is_independent_of_horizon_and_affine_in_channels() {
        let hp = ModelHyperparams::default();
        let grid: Vec<ScalePoint> = [(100, 64, 8), (1000, 64, 8), (100, 64, 16), (100, 64, 32)]
            .iter()
            .map(|&(horizon, hidden, channels)| ScalePoint { horizon, hidden, channels })
            .collect();
        let rows = scaling_probe(&grid, &hp, 0.05, 1, 0).unwrap();
        assert_eq!(rows[0].state_bytes, rows[1].state_bytes);
        let d1 = rows[3].state_bytes - rows[2].state_bytes;
        let d0 = rows[2].state_bytes - rows[0].state_bytes;
        assert_eq!(d1, 2 * d0);
        assert!(d0 > 0);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(scaling_probe(&[], &ModelHyperparams::default(), 0.1, 1, 0).is_err());
    }
}

//! Per-step trace and warp dumps of a single CPSNN run.

use std::path::Path;

use crate::dynamics::{forward_sequence, LayerParams, ModelHyperparams, Tape};
use crate::error::Result;
use crate::sequence::SpikeSequence;

/// Slow trace of the same input under fixed decay (`omega = 1`).
pub fn fixed_decay_reference(seq: &SpikeSequence, alpha_s: f64) -> Vec<Vec<f64>> {
    let mut z = vec![0.0; seq.channels()];
    let mut s = vec![0.0; seq.channels()];
    (0..seq.horizon())
        .map(|i| {
            seq.row_f64_into(i, &mut s);
            for (zc, sc) in z.iter_mut().zip(&s) {
                *zc = alpha_s * *zc + sc;
            }
            z.clone()
        })
        .collect()
}

/// Writes two CSV files for one run:
///
/// * `traces`: `t, f_0..f_{C-1}, z_0..z_{C-1}, zfixed_0..zfixed_{C-1}` where
///   `zfixed` is the slow trace under fixed decay,
/// * `warp`: `t, mean_omega, omega_0..omega_{C-1}`.
///
/// `t` runs from 1 to `T`. Returns the recorded tape.
pub fn diagnostics_dump(
    params: &LayerParams,
    seq: &SpikeSequence,
    hp: &ModelHyperparams,
    traces: &Path,
    warp: &Path,
) -> Result<Tape> {
    let tape = forward_sequence(seq, params, hp, true)?.tape.expect("tape requested");
    let reference = fixed_decay_reference(seq, hp.alpha_s);
    let c = hp.channels;

    let mut w = csv::Writer::from_path(traces)?;
    let mut header = vec!["t".to_string()];
    for prefix in ["f", "z", "zfixed"] {
        header.extend((0..c).map(|k| format!("{prefix}_{k}")));
    }
    w.write_record(&header)?;
    for i in 0..tape.len() {
        let mut rec = vec![(i + 1).to_string()];
        for row in [tape.f.row(i), tape.z.row(i), &reference[i][..]] {
            rec.extend(row.iter().map(|x| x.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(warp)?;
    let mut header = vec!["t".to_string(), "mean_omega".to_string()];
    header.extend((0..c).map(|k| format!("omega_{k}")));
    w.write_record(&header)?;
    for (i, row) in tape.omega.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / c as f64;
        let mut rec = vec![(i + 1).to_string(), mean.to_string()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(tape)
}

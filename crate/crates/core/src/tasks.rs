//! Long-gap temporal XOR benchmark: two cue spikes separated by a random gap,
//! buried in label-independent distractor spikes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::sequence::{CueMeta, SpikeSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub channels: usize,
    pub horizon: usize,
    pub gap_min: usize,
    pub gap_max: usize,
    /// Per-cell spike probability outside the cue cells.
    pub distractor_rate: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            channels: 8,
            horizon: 100,
            gap_min: 10,
            gap_max: 60,
            distractor_rate: 0.05,
            n_samples: 2000,
            seed: 0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.channels < 2 {
            return bad(format!("channels must be at least 2, got {}", self.channels));
        }
        if self.horizon < 2 {
            return bad(format!("horizon must be at least 2, got {}", self.horizon));
        }
        if !(1 <= self.gap_min && self.gap_min <= self.gap_max && self.gap_max < self.horizon) {
            return bad(format!(
                "gap range [{}, {}] must satisfy 1 <= gap_min <= gap_max <= horizon - 1 = {}",
                self.gap_min,
                self.gap_max,
                self.horizon - 1
            ));
        }
        if !(0.0..1.0).contains(&self.distractor_rate) {
            return bad(format!("distractor_rate must lie in [0, 1), got {}", self.distractor_rate));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        Ok(())
    }
}

/// Parity-XOR label of a cue pair.
pub fn xor_label(a: usize, b: usize) -> usize {
    (a % 2) ^ (b % 2)
}

pub fn generate_sample<R: Rng + ?Sized>(cfg: &TaskConfig, rng: &mut R) -> Result<SpikeSequence> {
    cfg.validate()?;
    let (t_len, c) = (cfg.horizon, cfg.channels);
    let gap = rng.random_range(cfg.gap_min..=cfg.gap_max);
    let t1 = rng.random_range(0..=t_len - 1 - gap);
    let t2 = t1 + gap;
    let a = rng.random_range(0..c);
    let b = rng.random_range(0..c);
    let mut seq = SpikeSequence::zeros(t_len, c, xor_label(a, b));
    if cfg.distractor_rate > 0.0 {
        for t in 0..t_len {
            for ch in 0..c {
                if rng.random_bool(cfg.distractor_rate) {
                    seq.set(t, ch, true);
                }
            }
        }
    }
    seq.set(t1, a, true);
    seq.set(t2, b, true);
    seq.meta = Some(CueMeta { t1, t2, a, b });
    Ok(seq)
}

/// Sample `i` is drawn from its own generator keyed by `(cfg.seed, i)`, so
/// the result does not depend on thread scheduling.
pub fn generate_dataset(cfg: &TaskConfig) -> Result<Vec<SpikeSequence>> {
    cfg.validate()?;
    (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| generate_sample(cfg, &mut stream_rng(cfg.seed, i as u64)))
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(rename = "C")]
    channels: usize,
    events: Vec<(usize, usize)>,
    label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<CueMeta>,
}

pub fn write_dataset<W: Write>(dataset: &[SpikeSequence], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for seq in dataset {
        let rec = Record {
            horizon: seq.horizon(),
            channels: seq.channels(),
            events: seq.events(),
            label: seq.label,
            meta: seq.meta,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_dataset(dataset: &[SpikeSequence], path: &Path) -> Result<()> {
    write_dataset(dataset, File::create(path)?)
}

/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_dataset<R: BufRead>(input: R, origin: &Path) -> Result<Vec<SpikeSequence>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            msg,
        };
        let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if rec.horizon == 0 || rec.channels == 0 {
            return Err(parse_err("T and C must be positive".into()));
        }
        let seq = SpikeSequence::from_events(rec.horizon, rec.channels, &rec.events, rec.label, rec.meta)
            .map_err(|e| parse_err(e.to_string()))?;
        out.push(seq);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<SpikeSequence>> {
    let file = File::open(path)?;
    read_dataset(BufReader::new(file), path)
}

/// Exact posterior probability of label 1 given only the raster.
///
/// Every pair of observed spikes `(t1, a)`, `(t1 + gap, b)` with an admissible
/// gap is a cue hypothesis. All hypotheses explain the remaining spikes as
/// distractors with the same likelihood, so each is weighted by its prior
/// `1 / (n_gaps (T - gap) C^2)` alone.
pub fn bayes_posterior(seq: &SpikeSequence, cfg: &TaskConfig) -> f64 {
    let events = seq.events();
    let (mut total, mut ones) = (0.0, 0.0);
    for &(t1, a) in &events {
        for &(t2, b) in &events {
            if t2 <= t1 {
                continue;
            }
            let gap = t2 - t1;
            if gap < cfg.gap_min || gap > cfg.gap_max {
                continue;
            }
            let w = 1.0 / (seq.horizon() - gap) as f64;
            total += w;
            if xor_label(a, b) == 1 {
                ones += w;
            }
        }
    }
    if total == 0.0 {
        0.5
    } else {
        ones / total
    }
}

/// Accuracy of the Bayes-optimal classifier on `dataset`: an upper bound on
/// what any model can reach in expectation on data drawn from `cfg`.
pub fn bayes_accuracy(dataset: &[SpikeSequence], cfg: &TaskConfig) -> f64 {
    if dataset.is_empty() {
        return f64::NAN;
    }
    let correct: f64 = dataset
        .par_iter()
        .map(|seq| {
            let p = bayes_posterior(seq, cfg);
            match (p.partial_cmp(&0.5), seq.label) {
                (Some(std::cmp::Ordering::Equal), _) => 0.5,
                (Some(std::cmp::Ordering::Greater), 1) | (Some(std::cmp::Ordering::Less), 0) => 1.0,
                _ => 0.0,
            }
        })
        .sum();
    correct / dataset.len() as f64
}

/// Counts used by the `gen` summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub label_one_fraction: f64,
    pub gap_min: Option<usize>,
    pub gap_max: Option<usize>,
    pub mean_spikes: f64,
}

pub fn summarize(dataset: &[SpikeSequence]) -> DatasetSummary {
    let n = dataset.len();
    let ones = dataset.iter().filter(|s| s.label == 1).count();
    let gaps: Vec<usize> = dataset.iter().filter_map(|s| s.meta.map(|m| m.gap())).collect();
    let spikes: usize = dataset.iter().map(|s| s.spike_count()).sum();
    let denom = n.max(1) as f64;
    DatasetSummary {
        n,
        label_one_fraction: ones as f64 / denom,
        gap_min: gaps.iter().copied().min(),
        gap_max: gaps.iter().copied().max(),
        mean_spikes: spikes as f64 / denom,
    }
}

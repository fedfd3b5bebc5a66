//! Mini-batch training shared by the CPSNN and both baselines.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backward::cross_entropy;
use super::optim::{adam_step, clip_gradients, AdamState, TrainingConfig};
use crate::baselines::{AdaptiveSnnParams, FixedSnnParams};
use crate::dynamics::{LayerParams, ModelHyperparams};
use crate::error::{Error, Result};
use crate::network::{AnyModel, ModelKind, Network};
use crate::rng::{named_rng, Stream};
use crate::sequence::SpikeSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub eval_loss: f64,
    pub eval_accuracy: f64,
    /// Mean pre-clipping global gradient norm over the epoch's updates.
    pub grad_norm: f64,
    /// Mean warp factor over training samples, steps and channels.
    pub mean_omega: Option<f64>,
    /// Mean state-adjoint norm per timestep over the epoch's training samples.
    pub grad_profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub kind: ModelKind,
    pub param_count: usize,
    pub epochs: Vec<EpochMetrics>,
}

impl TrainingHistory {
    pub fn final_eval_accuracy(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.eval_accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EvalReport {
    pub loss: f64,
    pub accuracy: f64,
    /// `confusion[label][predicted]`, for two classes.
    pub confusion: [[usize; 2]; 2],
    pub n: usize,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn check_dataset(data: &[SpikeSequence], hp: &ModelHyperparams, what: &str) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::Config(format!("{what} set is empty")))?;
    let horizon = first.horizon();
    for seq in data {
        if seq.channels() != hp.channels {
            return Err(Error::Config(format!(
                "{what} set has {} channels but the model expects {}",
                seq.channels(),
                hp.channels
            )));
        }
        if seq.horizon() != horizon {
            return Err(Error::Config(format!("{what} set mixes horizons {horizon} and {}", seq.horizon())));
        }
        if seq.label >= hp.classes {
            return Err(Error::Config(format!("{what} set has label {} >= classes", seq.label)));
        }
    }
    Ok(horizon)
}

/// Loss, accuracy and confusion counts of `model` over `data`.
pub fn evaluate<N: Network>(model: &N, data: &[SpikeSequence], hp: &ModelHyperparams) -> Result<EvalReport> {
    let results: Vec<(f64, usize, usize)> = data
        .par_iter()
        .map(|seq| {
            let out = model.run(seq, hp, false)?;
            Ok((cross_entropy(&out.logits, seq.label).0, seq.label, argmax(&out.logits)))
        })
        .collect::<Result<_>>()?;
    let mut confusion = [[0usize; 2]; 2];
    let mut loss = 0.0;
    let mut correct = 0;
    for (l, y, p) in &results {
        loss += l;
        if y == p {
            correct += 1;
        }
        if *y < 2 && *p < 2 {
            confusion[*y][*p] += 1;
        }
    }
    let n = results.len().max(1) as f64;
    Ok(EvalReport {
        loss: loss / n,
        accuracy: correct as f64 / n,
        confusion,
        n: results.len(),
    })
}

pub fn evaluate_any(model: &AnyModel, data: &[SpikeSequence], hp: &ModelHyperparams) -> Result<EvalReport> {
    match model {
        AnyModel::Cpsnn(p) => evaluate(p, data, hp),
        AnyModel::SnnFixed(p) => evaluate(p, data, hp),
        AnyModel::SnnAdaptive(p) => evaluate(p, data, hp),
    }
}

struct SampleResult<P> {
    loss: f64,
    correct: bool,
    grads: P,
    profile: Vec<f64>,
    omega: Option<(f64, usize)>,
}

/// Trains `model` in place for `cfg.epochs` epochs of shuffled mini-batches.
///
/// Per-sample backward passes run in parallel; their gradients are summed in
/// batch order, averaged, clipped and handed to Adam, so results do not
/// depend on the thread count.
pub fn fit<N: Network>(
    model: &mut N,
    train: &[SpikeSequence],
    eval: &[SpikeSequence],
    hp: &ModelHyperparams,
    cfg: &TrainingConfig,
) -> Result<TrainingHistory> {
    hp.validate()?;
    cfg.validate()?;
    model.check_shapes(hp)?;
    let horizon = check_dataset(train, hp, "training")?;
    check_dataset(eval, hp, "evaluation")?;

    let frozen: &[&str] = if cfg.train_mixing { &[] } else { model.frozen() };
    let mut adam = AdamState::new(model);
    let mut shuffle = named_rng(cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0u64;
    let mut history = TrainingHistory {
        kind: N::KIND,
        param_count: if cfg.train_mixing {
            model.tensors().iter().map(|(_, t)| t.len()).sum()
        } else {
            model.param_count()
        },
        epochs: Vec::with_capacity(cfg.epochs),
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let (mut loss_sum, mut correct, mut norm_sum, mut updates) = (0.0, 0usize, 0.0, 0usize);
        let mut omega_acc: Option<(f64, usize)> = None;
        let mut profile = vec![0.0; horizon];

        for batch in order.chunks(cfg.batch_size) {
            let current = &*model;
            let results: Vec<SampleResult<N>> = batch
                .par_iter()
                .map(|&idx| {
                    let seq = &train[idx];
                    let out = current.run(seq, hp, true)?;
                    let tape = out.tape.expect("tape requested");
                    let bw = current.backward(&tape, seq.label, hp)?;
                    Ok(SampleResult {
                        loss: bw.loss,
                        correct: argmax(&out.logits) == seq.label,
                        grads: bw.grads,
                        profile: bw.state_adjoint_norms,
                        omega: N::omega_stats(&tape),
                    })
                })
                .collect::<Result<_>>()?;

            let mut grads = model.zeros_like();
            for r in &results {
                grads.add_assign(&r.grads);
                loss_sum += r.loss;
                correct += usize::from(r.correct);
                for (p, x) in profile.iter_mut().zip(&r.profile) {
                    *p += x;
                }
                if let Some((s, n)) = r.omega {
                    let acc = omega_acc.get_or_insert((0.0, 0));
                    acc.0 += s;
                    acc.1 += n;
                }
            }
            grads.scale(1.0 / results.len() as f64);
            for (name, t) in grads.tensors_mut() {
                if frozen.contains(&name) {
                    t.fill(0.0);
                }
            }
            norm_sum += clip_gradients(&mut grads, cfg.clip_norm);
            step += 1;
            updates += 1;
            adam_step(model, &grads, &mut adam, cfg, step);
        }

        let n = train.len() as f64;
        profile.iter_mut().for_each(|p| *p /= n);
        let ev = evaluate(model, eval, hp)?;
        history.epochs.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            eval_loss: ev.loss,
            eval_accuracy: ev.accuracy,
            grad_norm: norm_sum / updates as f64,
            mean_omega: omega_acc.map(|(s, k)| s / k as f64),
            grad_profile: profile,
        });
    }
    Ok(history)
}

/// Initialises a model of `kind` from the run seed and trains it.
pub fn train_model(
    kind: ModelKind,
    train: &[SpikeSequence],
    eval: &[SpikeSequence],
    hp: &ModelHyperparams,
    cfg: &TrainingConfig,
) -> Result<(AnyModel, TrainingHistory)> {
    hp.validate()?;
    let mut rng = named_rng(cfg.seed, Stream::Init);
    Ok(match kind {
        ModelKind::Cpsnn => {
            let mut m = LayerParams::init(hp, &mut rng);
            let h = fit(&mut m, train, eval, hp, cfg)?;
            (AnyModel::Cpsnn(m), h)
        }
        ModelKind::SnnFixed => {
            let mut m = FixedSnnParams::init(hp, &mut rng);
            let h = fit(&mut m, train, eval, hp, cfg)?;
            (AnyModel::SnnFixed(m), h)
        }
        ModelKind::SnnAdaptive => {
            let mut m = AdaptiveSnnParams::init(hp, &mut rng);
            let h = fit(&mut m, train, eval, hp, cfg)?;
            (AnyModel::SnnAdaptive(m), h)
        }
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns `epoch,split,loss,accuracy,grad_norm,mean_omega`; one row per
/// epoch and split. Eval rows leave the gradient norm empty.
pub fn write_metrics_csv<W: Write>(history: &TrainingHistory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "split", "loss", "accuracy", "grad_norm", "mean_omega"])?;
    for e in &history.epochs {
        w.write_record([
            e.epoch.to_string(),
            "train".into(),
            e.train_loss.to_string(),
            e.train_accuracy.to_string(),
            e.grad_norm.to_string(),
            fmt_opt(e.mean_omega),
        ])?;
        w.write_record([
            e.epoch.to_string(),
            "eval".into(),
            e.eval_loss.to_string(),
            e.eval_accuracy.to_string(),
            String::new(),
            fmt_opt(e.mean_omega),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `epoch,t,grad_magnitude`, `t` counted from 1.
pub fn write_profile_csv<W: Write>(history: &TrainingHistory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "t", "grad_magnitude"])?;
    for e in &history.epochs {
        for (t, g) in e.grad_profile.iter().enumerate() {
            w.write_record([e.epoch.to_string(), (t + 1).to_string(), g.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_metrics(history: &TrainingHistory, metrics: &Path, profile: Option<&Path>) -> Result<()> {
    write_metrics_csv(history, std::io::BufWriter::new(std::fs::File::create(metrics)?))?;
    if let Some(p) = profile {
        write_profile_csv(history, std::io::BufWriter::new(std::fs::File::create(p)?))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{generate_dataset, TaskConfig};

    fn tiny() -> (ModelHyperparams, Vec<SpikeSequence>) {
        let hp = ModelHyperparams { hidden: 8, ..Default::default() };
        let task = TaskConfig {
            horizon: 30,
            gap_min: 3,
            gap_max: 10,
            n_samples: 32,
            seed: 4,
            ..Default::default()
        };
        (hp, generate_dataset(&task).unwrap())
    }

    #[test]
    fn zero_learning_rate_keeps_parameters_and_gives_ln2() {
        let (hp, data) = tiny();
        let cfg = TrainingConfig { learning_rate: 0.0, epochs: 1, batch_size: 1, ..Default::default() };
        let mut rng = named_rng(cfg.seed, Stream::Init);
        let init = LayerParams::init(&hp, &mut rng);
        let (model, hist) = train_model(ModelKind::Cpsnn, &data[..1], &data[..1], &hp, &cfg).unwrap();
        assert_eq!(model, AnyModel::Cpsnn(init));
        assert!((hist.epochs[0].train_loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_history() {
        let (hp, data) = tiny();
        let cfg = TrainingConfig { epochs: 2, batch_size: 8, seed: 3, ..Default::default() };
        for kind in ModelKind::ALL {
            let a = train_model(kind, &data, &data, &hp, &cfg).unwrap();
            let b = train_model(kind, &data, &data, &hp, &cfg).unwrap();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let (hp, data) = tiny();
        let hp4 = ModelHyperparams { channels: 4, ..hp };
        let cfg = TrainingConfig { epochs: 1, ..Default::default() };
        assert!(matches!(
            train_model(ModelKind::Cpsnn, &data, &data, &hp4, &cfg),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_model(ModelKind::Cpsnn, &[], &data, &hp4, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn metrics_csv_has_one_row_per_epoch_and_split() {
        let (hp, data) = tiny();
        let cfg = TrainingConfig { epochs: 3, batch_size: 16, ..Default::default() };
        let (_, hist) = train_model(ModelKind::Cpsnn, &data, &data, &hp, &cfg).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&hist, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch,split,loss,accuracy,grad_norm,mean_omega");
        assert_eq!(lines.len(), 1 + 2 * 3);
        let mut buf = Vec::new();
        write_profile_csv(&hist, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 3 * 30);
        for e in &hist.epochs {
            assert!((0.0..=1.0).contains(&e.train_accuracy) && (0.0..=1.0).contains(&e.eval_accuracy));
            assert!(e.train_loss >= 0.0 && e.eval_loss >= 0.0);
        }
    }
}

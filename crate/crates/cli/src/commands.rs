//! Subcommand definitions and their implementations.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpsnn::analysis::{
    check_nonstationarity, construct_retention_schedule, diagnostics_dump, effective_time, gradient_flow_profile,
    kernel_matrix, scaling_probe, verify_retention, verify_trace_expansion, write_scaling_csv, ScalePoint,
    ScalingRow, WarpSchedule,
};
use cpsnn::dynamics::forward_sequence;
use cpsnn::rng::stream_rng;
use cpsnn::tasks::{generate_dataset, load_dataset, save_dataset, summarize};
use cpsnn::train::{evaluate_any, train_model, EvalReport, TrainingHistory};
use cpsnn::{Ablation, AnyModel, ModelHyperparams, ModelKind, ResetGrad, SpikeSequence};
use rand::Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::snapshot::Snapshot;

#[derive(Debug, Parser)]
#[command(name = "cpsnn", version, about = "ChronoPlastic spiking networks: data, training, evaluation and analysis")]
pub struct Cli {
    /// Root seed. Overrides the seed of a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a temporal XOR dataset as JSON lines.
    Gen(GenArgs),
    /// Train a model and write metrics and snapshots.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
    /// Kernel, retention, gradient-flow, scaling and trace analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Run config whose `task` section provides the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub gap_min: Option<usize>,
    #[arg(long)]
    pub gap_max: Option<usize>,
    /// Distractor probability per raster cell.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Number of sequences.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblateArg {
    None,
    NoWarp,
    NoSlow,
    NoFast,
}

impl From<AblateArg> for Ablation {
    fn from(a: AblateArg) -> Self {
        match a {
            AblateArg::None => Ablation::Full,
            AblateArg::NoWarp => Ablation::NoWarp,
            AblateArg::NoSlow => Ablation::NoSlow,
            AblateArg::NoFast => Ablation::NoFast,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Model kind: cpsnn, snn or adaptive.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long, value_enum)]
    pub ablate: Option<AblateArg>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Independent runs with seeds `seed, seed + 1, ...`.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Treat the reset gate as a constant in the backward pass.
    #[arg(long)]
    pub detach_reset: bool,
    /// Adaptive baseline: feed the current without the `(1 - alpha)` factor.
    #[arg(long)]
    pub unscaled_input: bool,
    /// Train the fast/slow mixing weights too.
    #[arg(long)]
    pub train_mixing: bool,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Snapshot of the first run; further runs get `.r<k>` before the extension.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// JSON summary of final accuracies.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Write the effective config, which reproduces this run when loaded.
    #[arg(long)]
    pub dump_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Kernel matrix of a warp schedule with its bound and expansion checks.
    Kernel(KernelArgs),
    /// Build and verify a schedule that matches fixed decay, then retains longer.
    Retention(RetentionArgs),
    /// Per-step norm of the state adjoint.
    Gradflow(GradflowArgs),
    /// Streaming time and state size over a grid of sizes.
    Scaling(ScalingArgs),
    /// Per-step traces and warp factors of one sequence.
    Traces(TracesArgs),
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// CSV with a warp column.
    #[arg(long, conflicts_with_all = ["model", "random"])]
    pub omega_file: Option<PathBuf>,
    /// Column of `--omega-file` to read.
    #[arg(long, default_value = "omega")]
    pub column: String,
    /// Take the schedule from a CPSNN snapshot run on `--data`.
    #[arg(long, requires = "data", conflicts_with = "random")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    /// Draw the schedule uniformly from (0, 1].
    #[arg(long)]
    pub random: bool,
    #[arg(long, default_value_t = 1000)]
    pub horizon: usize,
    /// Base slow decay; defaults to the snapshot's value or 0.995.
    #[arg(long)]
    pub alpha_s: Option<f64>,
    /// Spike probability of the random input used for the expansion check.
    #[arg(long, default_value_t = 0.1)]
    pub input_rate: f64,
    /// Kernel entries as CSV: t, k, kappa, fixed, tau_eff.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetentionArgs {
    #[arg(long, default_value_t = 0.995)]
    pub alpha_s: f64,
    /// Length of the window that must match fixed decay.
    #[arg(long = "L", default_value_t = 100)]
    pub window: usize,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    /// Schedule as CSV: j, omega, kappa, fixed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradflowArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Single sequence to profile; otherwise the mean over the first `--limit`.
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub limit: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    pub horizons: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub hidden: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub channels: Vec<usize>,
    /// Timed runs per grid point; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.05)]
    pub rate: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TracesArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Receives `traces.csv` and `warp.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a, cli.seed),
        Command::Train(a) => cmd_train(a, cli.seed),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(AnalyzeCommand::Kernel(a)) => cmd_kernel(a, cli.seed),
        Command::Analyze(AnalyzeCommand::Retention(a)) => cmd_retention(a),
        Command::Analyze(AnalyzeCommand::Gradflow(a)) => cmd_gradflow(a),
        Command::Analyze(AnalyzeCommand::Scaling(a)) => cmd_scaling(a, cli.seed),
        Command::Analyze(AnalyzeCommand::Traces(a)) => cmd_traces(a),
    }
}

fn load_data(path: &Path) -> CliResult<Vec<SpikeSequence>> {
    load_dataset(path).map_err(|e| match e {
        cpsnn::Error::Io(io) => CliError::Data(format!("{}: {io}", path.display())),
        other => other.into(),
    })
}

fn pick<'a>(data: &'a [SpikeSequence], index: usize, path: &Path) -> CliResult<&'a SpikeSequence> {
    data.get(index)
        .ok_or_else(|| CliError::Data(format!("{} has {} sequences, no index {index}", path.display(), data.len())))
}

/// Channel count and horizon shared by every sequence.
fn data_dims(data: &[SpikeSequence], path: &Path) -> CliResult<(usize, usize)> {
    let first = data
        .first()
        .ok_or_else(|| CliError::Data(format!("{} holds no sequences", path.display())))?;
    let dims = (first.channels(), first.horizon());
    if let Some((i, s)) = data.iter().enumerate().find(|(_, s)| (s.channels(), s.horizon()) != dims) {
        return Err(CliError::Data(format!(
            "{}: sequence {} is {}x{}, the first is {}x{}",
            path.display(),
            i,
            s.horizon(),
            s.channels(),
            dims.1,
            dims.0
        )));
    }
    Ok(dims)
}

fn check_channels(data: &[SpikeSequence], path: &Path, hp: &ModelHyperparams) -> CliResult<()> {
    let (c, _) = data_dims(data, path)?;
    if c != hp.channels {
        return Err(CliError::Data(format!(
            "{} has {c} channels but the model expects {}",
            path.display(),
            hp.channels
        )));
    }
    Ok(())
}

fn cmd_gen(a: GenArgs, seed: Option<u64>) -> CliResult<()> {
    let mut task = match &a.config {
        Some(p) => RunConfig::load(p)?.task,
        None => Default::default(),
    };
    macro_rules! set {
        ($($field:ident = $value:expr),*) => {$(if let Some(v) = $value { task.$field = v; })*};
    }
    set!(
        channels = a.channels,
        horizon = a.horizon,
        gap_min = a.gap_min,
        gap_max = a.gap_max,
        distractor_rate = a.rate,
        n_samples = a.n,
        seed = seed
    );
    let data = generate_dataset(&task)?;
    save_dataset(&data, &a.out)?;
    let s = summarize(&data);
    println!(
        "wrote {} sequences to {} (label-1 fraction {:.3}, gap range [{}, {}], mean spikes {:.1})",
        s.n,
        a.out.display(),
        s.label_one_fraction,
        s.gap_min.unwrap_or(0),
        s.gap_max.unwrap_or(0),
        s.mean_spikes
    );
    Ok(())
}

/// Applies command-line overrides on top of the config file.
pub fn effective_config(a: &TrainArgs, seed: Option<u64>) -> CliResult<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if let Some(ab) = a.ablate {
        cfg.hyper.ablation = ab.into();
    }
    if let Some(e) = a.epochs {
        cfg.training.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.training.batch_size = b;
    }
    if let Some(lr) = a.lr {
        cfg.training.learning_rate = lr;
    }
    if let Some(h) = a.hidden {
        cfg.hyper.hidden = h;
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(s) = seed {
        cfg.training.seed = s;
    }
    if a.detach_reset {
        cfg.hyper.reset_grad = ResetGrad::Detach;
    }
    cfg.hyper.unscaled_input |= a.unscaled_input;
    cfg.training.train_mixing |= a.train_mixing;
    macro_rules! out {
        ($($field:ident),*) => {$(if let Some(p) = &a.$field { cfg.outputs.$field = Some(p.clone()); })*};
    }
    out!(metrics, profile, summary);
    if let Some(p) = &a.model_out {
        cfg.outputs.model = Some(p.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `dir/name.ext` becomes `dir/name.r<k>.ext`.
pub fn repeat_path(path: &Path, k: usize) -> PathBuf {
    if k == 0 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.r{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}.r{k}"),
    };
    path.with_file_name(name)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Metrics of every run: `repeat, epoch, split, loss, accuracy, grad_norm, mean_omega`.
pub fn write_run_metrics(histories: &[TrainingHistory], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["repeat", "epoch", "split", "loss", "accuracy", "grad_norm", "mean_omega"])?;
    for (r, h) in histories.iter().enumerate() {
        for e in &h.epochs {
            let (r, ep, om) = (r.to_string(), e.epoch.to_string(), opt(e.mean_omega));
            w.write_record([&r, &ep, "train", &e.train_loss.to_string(), &e.train_accuracy.to_string(), &e.grad_norm.to_string(), &om])?;
            w.write_record([&r, &ep, "eval", &e.eval_loss.to_string(), &e.eval_accuracy.to_string(), "", &om])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Gradient profiles of every run: `repeat, epoch, t, grad_magnitude`.
pub fn write_run_profiles(histories: &[TrainingHistory], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["repeat", "epoch", "t", "grad_magnitude"])?;
    for (r, h) in histories.iter().enumerate() {
        for e in &h.epochs {
            for (t, g) in e.grad_profile.iter().enumerate() {
                w.write_record([r.to_string(), e.epoch.to_string(), (t + 1).to_string(), g.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub model: ModelKind,
    pub ablation: Ablation,
    pub param_count: usize,
    pub seeds: Vec<u64>,
    pub final_eval_accuracy: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub sd: f64,
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn cmd_train(a: TrainArgs, seed: Option<u64>) -> CliResult<()> {
    let cfg = effective_config(&a, seed)?;
    let train = load_data(&a.train)?;
    let eval = load_data(&a.eval)?;
    check_channels(&train, &a.train, &cfg.hyper)?;
    check_channels(&eval, &a.eval, &cfg.hyper)?;
    if data_dims(&train, &a.train)?.1 != data_dims(&eval, &a.eval)?.1 {
        return Err(CliError::Data("training and evaluation horizons differ".into()));
    }
    if let Some(p) = &a.dump_config {
        cfg.save(p)?;
    }

    let mut histories = Vec::with_capacity(cfg.repeats);
    let mut seeds = Vec::with_capacity(cfg.repeats);
    let mut param_count = 0;
    for r in 0..cfg.repeats {
        let mut tc = cfg.training.clone();
        tc.seed = cfg.training.seed.wrapping_add(r as u64);
        let (model, history) = train_model(cfg.model, &train, &eval, &cfg.hyper, &tc)?;
        println!(
            "run {r} (seed {}): final train accuracy {:.4}, eval accuracy {:.4}",
            tc.seed,
            history.epochs.last().map_or(f64::NAN, |e| e.train_accuracy),
            history.final_eval_accuracy()
        );
        if let Some(p) = &cfg.outputs.model {
            Snapshot::new(model, cfg.hyper.clone(), tc.seed).save(&repeat_path(p, r))?;
        }
        param_count = history.param_count;
        seeds.push(tc.seed);
        histories.push(history);
    }
    if let Some(p) = &cfg.outputs.metrics {
        write_run_metrics(&histories, p)?;
    }
    if let Some(p) = &cfg.outputs.profile {
        write_run_profiles(&histories, p)?;
    }
    let finals: Vec<f64> = histories.iter().map(|h| h.final_eval_accuracy()).collect();
    let (mean, sd) = mean_sd(&finals);
    println!(
        "{} ({:?}, {param_count} trainable parameters): eval accuracy {mean:.4} +/- {sd:.4} over {} run(s)",
        cfg.model,
        cfg.hyper.ablation,
        finals.len()
    );
    if let Some(p) = &cfg.outputs.summary {
        let summary = TrainSummary {
            model: cfg.model,
            ablation: cfg.hyper.ablation,
            param_count,
            seeds,
            final_eval_accuracy: finals,
            mean,
            sd,
        };
        std::fs::write(p, serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    let snap = Snapshot::load(&a.model)?;
    let data = load_data(&a.data)?;
    check_channels(&data, &a.data, &snap.hyper)?;
    let report: EvalReport = evaluate_any(&snap.model, &data, &snap.hyper)?;
    println!(
        "{}: accuracy {:.4}, loss {:.4} on {} sequences; confusion [[{}, {}], [{}, {}]] (rows: label, columns: prediction)",
        snap.kind,
        report.accuracy,
        report.loss,
        report.n,
        report.confusion[0][0],
        report.confusion[0][1],
        report.confusion[1][0],
        report.confusion[1][1]
    );
    if let Some(p) = &a.out {
        std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

fn cpsnn_of(snap: &Snapshot, path: &Path) -> CliResult<cpsnn::LayerParams> {
    match &snap.model {
        AnyModel::Cpsnn(p) => Ok(p.clone()),
        other => Err(CliError::Usage(format!(
            "{} holds a {} model; this analysis needs a cpsnn model",
            path.display(),
            other.kind()
        ))),
    }
}

fn read_omega_column(path: &Path, column: &str) -> CliResult<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    let idx = match headers.iter().position(|h| h == column) {
        Some(i) => i,
        None if headers.len() == 1 => 0,
        None => {
            return Err(CliError::Usage(format!("{} has no column `{column}`", path.display())));
        }
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(idx).unwrap_or("");
        let v = cell.trim().parse::<f64>().map_err(|e| {
            CliError::Data(format!("{}:{}: `{cell}`: {e}", path.display(), line + 2))
        })?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct KernelChecks {
    pub horizon: usize,
    pub alpha_s: f64,
    pub bound_violations: usize,
    pub max_tau_eff_error: f64,
    pub max_telescoping_error: f64,
    pub expansion_deviation: f64,
    pub witness_lag: Option<usize>,
    pub witness_difference: Option<f64>,
}

impl KernelChecks {
    pub fn passed(&self) -> bool {
        self.bound_violations == 0
            && self.max_tau_eff_error <= 1e-12
            && self.max_telescoping_error <= 1e-12
            && self.expansion_deviation <= 1e-10
    }
}

/// Every check that the kernel of `schedule` must pass.
pub fn kernel_checks(
    schedule: &WarpSchedule,
    alpha_s: f64,
    input: &[f64],
    out: Option<&Path>,
) -> CliResult<KernelChecks> {
    let k = kernel_matrix(schedule, alpha_s)?;
    let n = schedule.len();
    let mut writer = match out {
        Some(p) => {
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(p)?));
            w.write_record(["t", "k", "kappa", "fixed", "tau_eff"])?;
            Some(w)
        }
        None => None,
    };
    let (mut violations, mut tau_err, mut tele_err) = (0, 0.0f64, 0.0f64);
    for t in 0..=n {
        // Running sum of omega_{k+1..t}, accumulated from the diagonal outwards.
        let mut tau = 0.0;
        for j in (0..=t).rev() {
            if j < t {
                tau += schedule.at(j + 1);
                tele_err = tele_err.max((k.get(t, j) - k.get(t, j + 1) * alpha_s.powf(schedule.at(j + 1))).abs());
            }
            let kap = k.get(t, j);
            let fixed = alpha_s.powi((t - j) as i32);
            if kap < fixed - 1e-12 || kap > 1.0 + 1e-12 || (j == t && kap != 1.0) {
                violations += 1;
            }
            tau_err = tau_err.max((kap - alpha_s.powf(tau)).abs());
            if let Some(w) = writer.as_mut() {
                w.write_record([t.to_string(), j.to_string(), kap.to_string(), fixed.to_string(), tau.to_string()])?;
            }
        }
    }
    if let Some(mut w) = writer {
        w.flush()?;
    }
    let spot = effective_time(schedule, 0, n)?;
    tau_err = tau_err.max((k.get(n, 0) - alpha_s.powf(spot)).abs());
    let witness = if n >= 2 { check_nonstationarity(schedule, alpha_s)? } else { None };
    Ok(KernelChecks {
        horizon: n,
        alpha_s,
        bound_violations: violations,
        max_tau_eff_error: tau_err,
        max_telescoping_error: tele_err,
        expansion_deviation: verify_trace_expansion(input, schedule, alpha_s)?,
        witness_lag: witness.as_ref().map(|w| w.lag),
        witness_difference: witness.as_ref().map(|w| w.difference()),
    })
}

fn cmd_kernel(a: KernelArgs, seed: Option<u64>) -> CliResult<()> {
    let seed = seed.unwrap_or(0);
    let mut alpha_s = a.alpha_s;
    let omega = if let Some(p) = &a.omega_file {
        read_omega_column(p, &a.column)?
    } else if let Some(mp) = &a.model {
        let snap = Snapshot::load(mp)?;
        let params = cpsnn_of(&snap, mp)?;
        let dp = a.data.as_deref().expect("clap enforces --data");
        let data = load_data(dp)?;
        check_channels(&data, dp, &snap.hyper)?;
        if a.channel >= snap.hyper.channels {
            return Err(CliError::Usage(format!("channel {} out of range", a.channel)));
        }
        alpha_s.get_or_insert(snap.hyper.alpha_s);
        let tape = forward_sequence(pick(&data, a.index, dp)?, &params, &snap.hyper, true)?
            .tape
            .expect("tape requested");
        tape.omega.iter().map(|row| row[a.channel]).collect()
    } else if a.random {
        let mut rng = stream_rng(seed, 0);
        (0..a.horizon).map(|_| 1.0 - rng.random::<f64>()).collect()
    } else {
        return Err(CliError::Usage("give one of --omega-file, --model or --random".into()));
    };
    let alpha_s = alpha_s.unwrap_or(0.995);
    let schedule = WarpSchedule::new(omega).map_err(|e| CliError::Data(e.to_string()))?;
    if !(0.0..=1.0).contains(&a.input_rate) {
        return Err(CliError::Usage(format!("input rate {} outside [0, 1]", a.input_rate)));
    }
    let mut rng = stream_rng(seed, 1);
    let input: Vec<f64> = (0..schedule.len())
        .map(|_| f64::from(u8::from(rng.random_bool(a.input_rate))))
        .collect();
    let checks = kernel_checks(&schedule, alpha_s, &input, a.out.as_deref())?;
    println!("{}", serde_json::to_string_pretty(&checks)?);
    if checks.passed() {
        println!("kernel checks: PASS");
        Ok(())
    } else {
        Err(CliError::Invariant("kernel checks failed".into()))
    }
}

fn cmd_retention(a: RetentionArgs) -> CliResult<()> {
    let plan = construct_retention_schedule(a.alpha_s, a.window, a.epsilon)?;
    let report = verify_retention(&plan)?;
    println!(
        "alpha_s {} L {} epsilon {}: fixed decay reaches epsilon at lag {:.3}; omega_bar = {:.6} after the window, schedule length {}",
        a.alpha_s,
        a.window,
        a.epsilon,
        plan.fixed_horizon,
        plan.omega_bar,
        plan.schedule.len()
    );
    println!(
        "local match (lags <= {}): max deviation {:.3e} -> {}",
        a.window,
        report.max_local_deviation,
        if report.local_ok { "PASS" } else { "FAIL" }
    );
    match report.retention_lag {
        Some(l) => println!(
            "retention: lag {l} keeps kappa {:.6} >= {} while fixed decay gives {:.6} -> PASS",
            report.kappa_at_lag.unwrap_or(f64::NAN),
            a.epsilon,
            report.fixed_at_lag.unwrap_or(f64::NAN)
        ),
        None => println!("retention: no lag beyond {} keeps kappa >= {} -> FAIL", a.window, a.epsilon),
    }
    if let Some(p) = &a.out {
        let k = kernel_matrix(&plan.schedule, plan.alpha_s)?;
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(p)?));
        w.write_record(["j", "omega", "kappa", "fixed"])?;
        for j in 1..=plan.schedule.len() {
            w.write_record([
                j.to_string(),
                plan.schedule.at(j).to_string(),
                k.get(j, 0).to_string(),
                plan.alpha_s.powi(j as i32).to_string(),
            ])?;
        }
        w.flush()?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Invariant("retention verification failed".into()))
    }
}

fn profile_of(model: &AnyModel, seq: &SpikeSequence, hp: &ModelHyperparams) -> cpsnn::Result<Vec<f64>> {
    match model {
        AnyModel::Cpsnn(p) => gradient_flow_profile(p, seq, hp),
        AnyModel::SnnFixed(p) => gradient_flow_profile(p, seq, hp),
        AnyModel::SnnAdaptive(p) => gradient_flow_profile(p, seq, hp),
    }
}

fn cmd_gradflow(a: GradflowArgs) -> CliResult<()> {
    let snap = Snapshot::load(&a.model)?;
    let data = load_data(&a.data)?;
    check_channels(&data, &a.data, &snap.hyper)?;
    let chosen: Vec<&SpikeSequence> = match a.index {
        Some(i) => vec![pick(&data, i, &a.data)?],
        None => data.iter().take(a.limit.max(1)).collect(),
    };
    let mut mean = vec![0.0; chosen[0].horizon()];
    for seq in &chosen {
        for (m, g) in mean.iter_mut().zip(profile_of(&snap.model, seq, &snap.hyper)?) {
            *m += g / chosen.len() as f64;
        }
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&a.out)?));
    w.write_record(["t", "grad_magnitude"])?;
    for (t, g) in mean.iter().enumerate() {
        w.write_record([(t + 1).to_string(), g.to_string()])?;
    }
    w.flush()?;
    println!(
        "gradient profile over {} sequence(s): first step {:.4e}, last step {:.4e} -> {}",
        chosen.len(),
        mean[0],
        mean[mean.len() - 1],
        a.out.display()
    );
    Ok(())
}

/// State bytes must not change with the horizon, and a tenfold longer
/// horizon must cost between five and twenty times as much.
pub fn scaling_verdicts(rows: &[ScalingRow]) -> Vec<(String, bool)> {
    let mut out = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            if (a.hidden, a.channels) != (b.hidden, b.channels) {
                continue;
            }
            out.push((
                format!("state bytes H={} C={} T={} vs T={}", a.hidden, a.channels, a.horizon, b.horizon),
                a.state_bytes == b.state_bytes,
            ));
            if b.horizon == 10 * a.horizon && a.horizon >= 1000 {
                let ratio = b.wall_time / a.wall_time;
                out.push((
                    format!("time ratio T={} / T={} = {ratio:.2} in [5, 20]", b.horizon, a.horizon),
                    (5.0..=20.0).contains(&ratio),
                ));
            }
        }
    }
    out
}

fn cmd_scaling(a: ScalingArgs, seed: Option<u64>) -> CliResult<()> {
    let mut grid = Vec::new();
    for &hidden in &a.hidden {
        for &channels in &a.channels {
            for &horizon in &a.horizons {
                grid.push(ScalePoint { horizon, hidden, channels });
            }
        }
    }
    let rows = scaling_probe(&grid, &ModelHyperparams::default(), a.rate, a.repeats, seed.unwrap_or(0))?;
    write_scaling_csv(&rows, std::io::stdout().lock())?;
    if let Some(p) = &a.out {
        write_scaling_csv(&rows, BufWriter::new(File::create(p)?))?;
    }
    let verdicts = scaling_verdicts(&rows);
    for (what, ok) in &verdicts {
        println!("{}: {what}", if *ok { "PASS" } else { "FAIL" });
    }
    if verdicts.iter().all(|(_, ok)| *ok) {
        Ok(())
    } else {
        Err(CliError::Invariant("scaling checks failed".into()))
    }
}

fn cmd_traces(a: TracesArgs) -> CliResult<()> {
    let snap = Snapshot::load(&a.model)?;
    let params = cpsnn_of(&snap, &a.model)?;
    let data = load_data(&a.data)?;
    check_channels(&data, &a.data, &snap.hyper)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let (tp, wp) = (a.out_dir.join("traces.csv"), a.out_dir.join("warp.csv"));
    let tape = diagnostics_dump(&params, pick(&data, a.index, &a.data)?, &snap.hyper, &tp, &wp)?;
    println!(
        "wrote {} steps to {} and {} (mean omega {:.4})",
        tape.len(),
        tp.display(),
        wp.display(),
        tape.mean_omega()
    );
    Ok(())
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpsnn"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn cpsnn")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "cpsnn {args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run_in(dir, args).status.code().expect("exit code")
}

fn gen(dir: &Path, name: &str, n: usize, seed: u64, extra: &[&str]) -> PathBuf {
    let n = n.to_string();
    let seed = seed.to_string();
    let mut args = vec!["gen", "--n", &n, "--seed", &seed, "--out", name];
    args.extend_from_slice(extra);
    ok(dir, &args);
    dir.join(name)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (headers, rows)
}

#[test]
fn gen_writes_one_line_per_sequence_deterministically() {
    let dir = TempDir::new().unwrap();
    let a = gen(dir.path(), "a.jsonl", 37, 5, &[]);
    let b = gen(dir.path(), "b.jsonl", 37, 5, &[]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 37);
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let c = gen(dir.path(), "c.jsonl", 37, 6, &[]);
    assert_ne!(text, std::fs::read_to_string(&c).unwrap());
}

#[test]
fn gen_rejects_gap_reaching_the_horizon() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(dir.path(), &["gen", "--n", "4", "--horizon", "50", "--gap-max", "50", "--out", "x.jsonl"]), 1);
    assert!(!dir.path().join("x.jsonl").exists());
}

#[test]
fn usage_errors_and_help_have_the_documented_exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(dir.path(), &["--help"]), 0);
    assert_eq!(code(dir.path(), &["--version"]), 0);
    assert_eq!(code(dir.path(), &["frobnicate"]), 1);
    assert_eq!(code(dir.path(), &["train", "--model", "transformer", "--train", "a", "--eval", "b"]), 1);
    assert_eq!(code(dir.path(), &["eval", "--model", "missing.json", "--data", "missing.jsonl"]), 2);
}

#[test]
fn train_writes_metrics_with_the_expected_schema() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "tr.jsonl", 64, 1, &[]);
    gen(d, "ev.jsonl", 32, 2, &[]);
    ok(
        d,
        &[
            "train", "--train", "tr.jsonl", "--eval", "ev.jsonl", "--epochs", "3", "--repeats", "2", "--metrics",
            "m.csv", "--profile", "p.csv", "--model-out", "model.json", "--summary", "s.json",
        ],
    );
    let (headers, rows) = read_csv(&d.join("m.csv"));
    assert_eq!(headers, ["repeat", "epoch", "split", "loss", "accuracy", "grad_norm", "mean_omega"]);
    assert_eq!(rows.len(), 2 * 3 * 2);
    for row in &rows {
        let acc: f64 = row[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        let loss: f64 = row[3].parse().unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        let omega: f64 = row[6].parse().unwrap();
        assert!(omega > 0.0 && omega <= 1.0);
        assert_eq!(row[5].is_empty(), row[2] == "eval");
    }
    let (ph, prow) = read_csv(&d.join("p.csv"));
    assert_eq!(ph, ["repeat", "epoch", "t", "grad_magnitude"]);
    assert_eq!(prow.len(), 2 * 3 * 100);
    assert!(d.join("model.json").exists() && d.join("model.r1.json").exists());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    assert_eq!(summary["final_eval_accuracy"].as_array().unwrap().len(), 2);
    assert_eq!(summary["seeds"], serde_json::json!([0, 1]));
}

#[test]
fn no_warp_ablation_reports_unit_warp_and_baselines_leave_it_blank() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "tr.jsonl", 48, 1, &[]);
    gen(d, "ev.jsonl", 16, 2, &[]);
    let common = ["--train", "tr.jsonl", "--eval", "ev.jsonl", "--epochs", "2", "--repeats", "1"];
    let mut args = vec!["train", "--ablate", "no-warp", "--metrics", "nw.csv"];
    args.extend_from_slice(&common);
    ok(d, &args);
    for row in read_csv(&d.join("nw.csv")).1 {
        assert_eq!(row[6].parse::<f64>().unwrap(), 1.0);
    }
    let mut args = vec!["train", "--model", "snn", "--metrics", "snn.csv"];
    args.extend_from_slice(&common);
    ok(d, &args);
    for row in read_csv(&d.join("snn.csv")).1 {
        assert!(row[6].is_empty());
    }
}

#[test]
fn eval_of_a_memorised_set_is_perfect_and_an_untrained_model_is_at_chance() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "clean.jsonl", 64, 3, &["--rate", "0"]);
    ok(
        d,
        &[
            "train", "--train", "clean.jsonl", "--eval", "clean.jsonl", "--epochs", "150", "--repeats", "1", "--lr", "0.03",
            "--batch-size", "16", "--model-out", "fit.json",
        ],
    );
    ok(d, &["eval", "--model", "fit.json", "--data", "clean.jsonl", "--out", "fit_report.json"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["accuracy"].as_f64().unwrap(), 1.0);

    gen(d, "big.jsonl", 1000, 4, &[]);
    ok(
        d,
        &[
            "train", "--train", "clean.jsonl", "--eval", "clean.jsonl", "--epochs", "1", "--repeats", "1", "--lr",
            "0", "--model-out", "init.json",
        ],
    );
    ok(d, &["eval", "--model", "init.json", "--data", "big.jsonl", "--out", "init_report.json"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("init_report.json")).unwrap()).unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.4..=0.6).contains(&acc), "untrained accuracy {acc}");
    let confusion = report["confusion"].as_array().unwrap();
    let total: u64 = confusion.iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 1000);
}

#[test]
fn channel_mismatch_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "c4.jsonl", 16, 1, &["--channels", "4"]);
    let args = ["train", "--train", "c4.jsonl", "--eval", "c4.jsonl", "--epochs", "1", "--repeats", "1"];
    let out = run_in(d, &args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channels"));
}

#[test]
fn snapshots_with_another_format_version_are_refused() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "tr.jsonl", 16, 1, &[]);
    ok(d, &["train", "--train", "tr.jsonl", "--eval", "tr.jsonl", "--epochs", "1", "--repeats", "1", "--model-out", "m.json"]);
    let mut snap: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    snap["format_version"] = serde_json::json!(99);
    std::fs::write(d.join("future.json"), snap.to_string()).unwrap();
    let out = run_in(d, &["eval", "--model", "future.json", "--data", "tr.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("99"));

    snap["format_version"] = serde_json::json!(1);
    snap["shapes"]["w"] = serde_json::json!([3, 3]);
    std::fs::write(d.join("bad_shape.json"), snap.to_string()).unwrap();
    assert_eq!(code(d, &["eval", "--model", "bad_shape.json", "--data", "tr.jsonl"]), 2);
}

#[test]
fn dumped_config_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "tr.jsonl", 40, 1, &[]);
    gen(d, "ev.jsonl", 20, 2, &[]);
    ok(
        d,
        &[
            "train", "--train", "tr.jsonl", "--eval", "ev.jsonl", "--epochs", "2", "--repeats", "1", "--model",
            "adaptive", "--lr", "0.02", "--hidden", "16", "--seed", "9", "--metrics", "a.csv", "--dump-config",
            "cfg.json",
        ],
    );
    ok(d, &["train", "--config", "cfg.json", "--train", "tr.jsonl", "--eval", "ev.jsonl", "--metrics", "b.csv"]);
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());
    let cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("cfg.json")).unwrap()).unwrap();
    assert_eq!(cfg["model"], "adaptive");
    assert_eq!(cfg["training"]["seed"], 9);

    std::fs::write(d.join("typo.json"), r#"{"modle": "snn"}"#).unwrap();
    assert_eq!(code(d, &["train", "--config", "typo.json", "--train", "tr.jsonl", "--eval", "ev.jsonl"]), 1);
}

#[test]
fn analyze_retention_reports_the_reference_schedule() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let stdout = ok(d, &["analyze", "retention", "--alpha-s", "0.995", "--L", "100", "--epsilon", "0.5", "--out", "r.csv"]);
    assert!(stdout.contains("omega_bar = 0.382826"), "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 2);
    let (headers, rows) = read_csv(&d.join("r.csv"));
    assert_eq!(headers, ["j", "omega", "kappa", "fixed"]);
    assert_eq!(rows.len(), 200);

    let out = run_in(d, &["analyze", "retention", "--alpha-s", "0.5", "--L", "100", "--epsilon", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn analyze_kernel_accepts_all_three_schedule_sources() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let stdout = ok(d, &["analyze", "kernel", "--random", "--horizon", "60", "--out", "k.csv"]);
    assert!(stdout.contains("kernel checks: PASS"));
    let (headers, rows) = read_csv(&d.join("k.csv"));
    assert_eq!(headers, ["t", "k", "kappa", "fixed", "tau_eff"]);
    assert_eq!(rows.len(), 61 * 62 / 2);

    std::fs::write(d.join("w.csv"), "t,omega\n1,1.0\n2,0.5\n3,0.25\n").unwrap();
    ok(d, &["analyze", "kernel", "--omega-file", "w.csv", "--alpha-s", "0.9"]);
    std::fs::write(d.join("bad.csv"), "omega\n1.0\n1.5\n").unwrap();
    assert_eq!(code(d, &["analyze", "kernel", "--omega-file", "bad.csv"]), 2);
    assert_eq!(code(d, &["analyze", "kernel"]), 1);

    gen(d, "tr.jsonl", 8, 1, &[]);
    ok(d, &["train", "--train", "tr.jsonl", "--eval", "tr.jsonl", "--epochs", "1", "--repeats", "1", "--model-out", "m.json"]);
    ok(d, &["analyze", "kernel", "--model", "m.json", "--data", "tr.jsonl", "--index", "3", "--channel", "2"]);
}

#[test]
fn analyze_gradflow_and_traces_write_their_tables() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "tr.jsonl", 8, 1, &[]);
    ok(d, &["train", "--train", "tr.jsonl", "--eval", "tr.jsonl", "--epochs", "1", "--repeats", "1", "--model-out", "m.json"]);
    ok(d, &["analyze", "gradflow", "--model", "m.json", "--data", "tr.jsonl", "--limit", "4", "--out", "g.csv"]);
    let (headers, rows) = read_csv(&d.join("g.csv"));
    assert_eq!(headers, ["t", "grad_magnitude"]);
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() >= 0.0));

    ok(d, &["analyze", "traces", "--model", "m.json", "--data", "tr.jsonl", "--out-dir", "out"]);
    let (th, trows) = read_csv(&d.join("out/traces.csv"));
    assert_eq!(th.len(), 1 + 3 * 8);
    assert_eq!(trows.len(), 100);
    let (wh, _) = read_csv(&d.join("out/warp.csv"));
    assert_eq!(&wh[..2], ["t", "mean_omega"]);
    assert_eq!(code(d, &["analyze", "traces", "--model", "m.json", "--data", "tr.jsonl", "--index", "50", "--out-dir", "o2"]), 2);

    ok(d, &["train", "--model", "snn", "--train", "tr.jsonl", "--eval", "tr.jsonl", "--epochs", "1", "--repeats", "1", "--model-out", "s.json"]);
    assert_eq!(code(d, &["analyze", "traces", "--model", "s.json", "--data", "tr.jsonl", "--out-dir", "o3"]), 1);
    ok(d, &["analyze", "gradflow", "--model", "s.json", "--data", "tr.jsonl", "--index", "0", "--out", "gs.csv"]);
}

#[test]
fn analyze_scaling_keeps_state_size_fixed() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let stdout = ok(d, &["analyze", "scaling", "--horizons", "50,500", "--hidden", "8,16", "--repeats", "1", "--out", "s.csv"]);
    assert!(!stdout.contains("FAIL"));
    let (headers, rows) = read_csv(&d.join("s.csv"));
    assert_eq!(headers, ["horizon", "hidden", "channels", "wall_time", "state_bytes"]);
    assert_eq!(rows.len(), 4);
}

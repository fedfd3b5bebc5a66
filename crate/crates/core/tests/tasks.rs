use std::io::Write;

use cpsnn::tasks::*;
use cpsnn::{Error, SpikeSequence, TaskConfig};
use proptest::prelude::*;

fn cfg(n: usize, seed: u64) -> TaskConfig {
    TaskConfig { n_samples: n, seed, ..Default::default() }
}

#[test]
fn datasets_are_reproducible_and_seed_dependent() {
    let a = generate_dataset(&cfg(200, 42)).unwrap();
    assert_eq!(a, generate_dataset(&cfg(200, 42)).unwrap());
    assert_ne!(a, generate_dataset(&cfg(200, 43)).unwrap());
}

#[test]
fn prefix_of_a_larger_dataset_is_the_smaller_dataset() {
    let small = generate_dataset(&cfg(50, 9)).unwrap();
    let large = generate_dataset(&cfg(120, 9)).unwrap();
    assert_eq!(&large[..50], &small[..]);
}

#[test]
fn labels_are_balanced() {
    let data = generate_dataset(&cfg(2000, 42)).unwrap();
    let ones = data.iter().filter(|s| s.label == 1).count() as f64 / 2000.0;
    assert!((0.45..=0.55).contains(&ones), "{ones}");
}

#[test]
fn gaps_are_uniform_by_chi_square() {
    let data = generate_dataset(&cfg(2000, 7)).unwrap();
    let mut counts = [0usize; 51];
    for s in &data {
        counts[s.meta.unwrap().gap() - 10] += 1;
    }
    let expected = 2000.0 / 51.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 50 degrees of freedom.
    assert!(chi2 < 76.154, "chi2 = {chi2}");
}

#[test]
fn distractor_density_does_not_depend_on_the_label() {
    let data = generate_dataset(&cfg(4000, 11)).unwrap();
    let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for s in &data {
        let m = s.meta.unwrap();
        let distractors = s.events().iter().filter(|&&e| e != (m.t1, m.a) && e != (m.t2, m.b)).count();
        groups[s.label].push(distractors as f64);
    }
    let stats = |g: &[f64]| {
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n)
    };
    let ((m0, v0), (m1, v1)) = (stats(&groups[0]), stats(&groups[1]));
    let z = (m0 - m1) / (v0 + v1).sqrt();
    assert!(z.abs() < 2.576, "z = {z}");
    let cells = 100.0 * 8.0 - 2.0;
    assert!((m0 / cells - 0.05).abs() < 0.002);
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let data = generate_dataset(&cfg(100, 3)).unwrap();
    save_dataset(&data, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 100);
    assert_eq!(load_dataset(&path).unwrap(), data);
}

#[test]
fn records_use_the_sparse_event_layout() {
    let seq = SpikeSequence::from_events(5, 3, &[(0, 2), (4, 1)], 1, None).unwrap();
    let mut buf = Vec::new();
    write_dataset(&[seq], &mut buf).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(v["T"], 5);
    assert_eq!(v["C"], 3);
    assert_eq!(v["events"], serde_json::json!([[0, 2], [4, 1]]));
    assert_eq!(v["label"], 1);
}

#[test]
fn empty_file_is_an_empty_dataset() {
    let f = tempfile::NamedTempFile::new().unwrap();
    assert!(load_dataset(f.path()).unwrap().is_empty());
}

#[test]
fn truncated_line_reports_its_line_number() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    let data = generate_dataset(&cfg(2, 1)).unwrap();
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf).unwrap();
    f.write_all(&buf).unwrap();
    f.write_all(br#"{"T":100,"C":8,"events":[[1,"#).unwrap();
    match load_dataset(f.path()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn out_of_range_events_are_parse_errors() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, r#"{{"T":4,"C":2,"events":[[4,0]],"label":0}}"#).unwrap();
    assert!(matches!(load_dataset(f.path()), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn summary_reports_balance_and_gap_range() {
    let data = generate_dataset(&cfg(500, 5)).unwrap();
    let s = summarize(&data);
    assert_eq!(s.n, 500);
    assert!(s.gap_min.unwrap() >= 10 && s.gap_max.unwrap() <= 60);
}

proptest! {
    #[test]
    fn cues_are_always_present(seed in any::<u64>(), gap_min in 1usize..30, extra in 0usize..30, rate in 0.0f64..0.3) {
        let c = TaskConfig { gap_min, gap_max: gap_min + extra, distractor_rate: rate, n_samples: 20, seed, ..Default::default() };
        for s in generate_dataset(&c).unwrap() {
            let m = s.meta.unwrap();
            prop_assert!(s.get(m.t1, m.a) && s.get(m.t2, m.b));
            prop_assert!((gap_min..=gap_min + extra).contains(&m.gap()));
            prop_assert_eq!(s.label, xor_label(m.a, m.b));
        }
    }

    #[test]
    fn serialization_is_exact(seed in any::<u64>(), rate in 0.0f64..0.5) {
        let c = TaskConfig { distractor_rate: rate, n_samples: 5, seed, ..Default::default() };
        let data = generate_dataset(&c).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        prop_assert_eq!(read_dataset(&buf[..], std::path::Path::new("mem")).unwrap(), data);
    }
}

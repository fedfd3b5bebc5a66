use cpsnn::analysis::*;
use cpsnn::dynamics::{forward_sequence, warp_factor};
use cpsnn::linalg::{sigmoid, Matrix};
use cpsnn::{FixedSnnParams, LayerParams, ModelHyperparams, SpikeSequence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_schedule(rng: &mut ChaCha8Rng, n: usize) -> WarpSchedule {
    WarpSchedule::new((0..n).map(|_| rng.random_range(1e-3..=1.0)).collect()).unwrap()
}

#[test]
fn kernel_matches_explicit_product_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sched = random_schedule(&mut rng, 50);
    let k = kernel_matrix(&sched, 0.97).unwrap();
    let dense = k.to_dense();
    for t in 0..=50 {
        for j in 0..=50 {
            let mut p = if j <= t { 1.0 } else { 0.0 };
            for m in j + 1..=t {
                p *= 0.97f64.powf(sched.at(m));
            }
            assert!((dense[t][j] - p).abs() < 1e-12, "({t},{j})");
        }
    }
}

#[test]
fn recurrence_equals_expansion_on_long_random_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let sched = random_schedule(&mut rng, 1000);
        let p = rng.random_range(0.01..0.5);
        let input: Vec<f64> = (0..1000).map(|_| f64::from(u8::from(rng.random_bool(p)))).collect();
        let alpha = rng.random_range(0.9..0.9999);
        assert!(verify_trace_expansion(&input, &sched, alpha).unwrap() <= 1e-10);
    }
}

#[test]
fn expansion_rejects_length_mismatch() {
    let sched = WarpSchedule::constant(1.0, 10).unwrap();
    assert!(verify_trace_expansion(&[0.0; 9], &sched, 0.9).is_err());
}

#[test]
fn single_cue_trace_follows_the_kernel_row_of_the_learned_schedule() {
    let hp = ModelHyperparams { channels: 2, hidden: 3, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut m = LayerParams::init(&hp, &mut rng);
    m.w_c = Matrix::random_normal(2, 4, 2.0, &mut rng);
    m.b_c = vec![-1.0, 0.5];
    let seq = SpikeSequence::from_events(60, 2, &[(4, 1)], 0, None).unwrap();
    let tape = forward_sequence(&seq, &m, &hp, true).unwrap().tape.unwrap();
    let omega: Vec<f64> = tape.omega.iter().map(|r| r[1]).collect();
    let kappa = kernel_matrix(&WarpSchedule::new(omega).unwrap(), hp.alpha_s).unwrap();
    for t in 5..=60 {
        assert!((tape.z.row(t - 1)[1] - kappa.get(t, 5)).abs() < 1e-12);
    }
}

#[test]
fn learned_schedule_with_input_dependent_warp_is_nonstationary() {
    let hp = ModelHyperparams { channels: 1, hidden: 1, ..Default::default() };
    let mut m = LayerParams::zeros(&hp);
    m.w_c.data = vec![-6.0, 0.0];
    m.b_c = vec![2.0];
    let seq = SpikeSequence::from_events(40, 1, &[(3, 0), (20, 0), (21, 0)], 0, None).unwrap();
    let tape = forward_sequence(&seq, &m, &hp, true).unwrap().tape.unwrap();
    let sched = WarpSchedule::new(tape.omega.iter().map(|r| r[0]).collect()).unwrap();
    let w = check_nonstationarity(&sched, hp.alpha_s).unwrap().expect("warp varies");
    assert!(w.difference() > 1e-9);
    assert_eq!(w.first.0 - w.first.1, w.second.0 - w.second.1);
}

#[test]
fn fixed_snn_gradient_decays_geometrically_over_a_silent_stretch() {
    let hp = ModelHyperparams { channels: 2, hidden: 1, ..Default::default() };
    let mut m = FixedSnnParams::init(&hp, &mut ChaCha8Rng::seed_from_u64(0));
    // Channel 0 pushes the membrane negative, channel 1 drives it over threshold.
    m.w.data = vec![-5.0, 15.0];
    m.w_out.data = vec![1.0, -1.0];
    let seq = SpikeSequence::from_events(80, 2, &[(2, 0), (70, 1)], 0, None).unwrap();
    let profile = gradient_flow_profile(&m, &seq, &hp).unwrap();
    let (t, l) = (10, 40);
    assert!(profile[t + l] > 0.0);
    let ratio = profile[t] / profile[t + l];
    assert!((ratio - hp.alpha_m.powi(l as i32)).abs() < 1e-9, "{ratio}");
}

#[test]
fn slowed_warp_preserves_gradient_flow_better_than_fixed_decay() {
    let hp = ModelHyperparams { channels: 2, hidden: 1, ..Default::default() };
    let mut snn = FixedSnnParams::init(&hp, &mut ChaCha8Rng::seed_from_u64(0));
    snn.w.data = vec![-5.0, 15.0];
    snn.w_out.data = vec![1.0, -1.0];
    let mut cps = LayerParams::zeros(&hp);
    cps.w = snn.w.clone();
    cps.w_out = snn.w_out.clone();
    cps.b_c = vec![-4.0; 2];
    let seq = SpikeSequence::from_events(80, 2, &[(2, 0), (70, 1)], 0, None).unwrap();
    let a = gradient_flow_profile(&snn, &seq, &hp).unwrap();
    let b = gradient_flow_profile(&cps, &seq, &hp).unwrap();
    let (t, l) = (10, 40);
    assert!(b[t] / b[t + l] > a[t] / a[t + l]);
}

#[test]
fn silent_input_has_a_zero_gradient_profile() {
    let hp = ModelHyperparams::default();
    let m = LayerParams::init(&hp, &mut ChaCha8Rng::seed_from_u64(1));
    let seq = SpikeSequence::zeros(50, hp.channels, 0);
    assert!(gradient_flow_profile(&m, &seq, &hp).unwrap().iter().all(|&g| g == 0.0));
}

#[test]
fn diagnostics_of_silent_input_show_the_bias_response() {
    let dir = tempfile::tempdir().unwrap();
    let hp = ModelHyperparams { channels: 3, hidden: 4, ..Default::default() };
    let m = LayerParams::init(&hp, &mut ChaCha8Rng::seed_from_u64(2));
    let seq = SpikeSequence::zeros(20, 3, 0);
    let (tp, wp) = (dir.path().join("traces.csv"), dir.path().join("warp.csv"));
    diagnostics_dump(&m, &seq, &hp, &tp, &wp).unwrap();
    let mut r = csv::Reader::from_path(&tp).unwrap();
    assert_eq!(r.headers().unwrap().len(), 1 + 3 * 3);
    for rec in r.records() {
        let rec = rec.unwrap();
        assert!(rec.iter().skip(1).all(|x| x.parse::<f64>().unwrap() == 0.0));
    }
    let bias = sigmoid(hp.warp_bias_init);
    let mut r = csv::Reader::from_path(&wp).unwrap();
    assert_eq!(&r.headers().unwrap()[1], "mean_omega");
    let mut n = 0;
    for rec in r.records() {
        let rec = rec.unwrap();
        assert!(rec.iter().skip(1).all(|x| (x.parse::<f64>().unwrap() - bias).abs() < 1e-15));
        n += 1;
    }
    assert_eq!(n, 20);
}

#[test]
fn diagnostics_round_trip_the_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let hp = ModelHyperparams { channels: 2, hidden: 4, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = LayerParams::init(&hp, &mut rng);
    m.w_c = Matrix::random_normal(2, 4, 1.0, &mut rng);
    let seq = SpikeSequence::from_events(30, 2, &[(0, 0), (5, 1), (6, 1), (20, 0)], 0, None).unwrap();
    let (tp, wp) = (dir.path().join("t.csv"), dir.path().join("w.csv"));
    let tape = diagnostics_dump(&m, &seq, &hp, &tp, &wp).unwrap();
    let reference = fixed_decay_reference(&seq, hp.alpha_s);
    let mut r = csv::Reader::from_path(&tp).unwrap();
    for (i, rec) in r.records().enumerate() {
        let v: Vec<f64> = rec.unwrap().iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[0], (i + 1) as f64);
        assert_eq!(&v[1..3], tape.f.row(i));
        assert_eq!(&v[3..5], tape.z.row(i));
        assert_eq!(&v[5..7], &reference[i][..]);
    }
    let mut r = csv::Reader::from_path(&wp).unwrap();
    for (i, rec) in r.records().enumerate() {
        let v: Vec<f64> = rec.unwrap().iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!(&v[2..4], tape.omega.row(i));
    }
}

#[test]
fn retention_construction_at_reference_settings() {
    let plan = construct_retention_schedule(0.995, 100, 0.5).unwrap();
    let r = verify_retention(&plan).unwrap();
    assert!(r.local_ok && r.retention_ok);
    assert_eq!(r.retention_lag, Some(139));
    assert!(r.kappa_at_lag.unwrap() >= 0.5 && r.fixed_at_lag.unwrap() < 0.5);
}

fn random_run(seed: u64, floor: f64) -> (cpsnn::dynamics::Tape, LayerParams, ModelHyperparams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha_s = rng.random_range(0.9..0.999);
    let hp = ModelHyperparams {
        channels: rng.random_range(1..=6),
        hidden: rng.random_range(1..=8),
        alpha_f: rng.random_range(0.1..alpha_s - 0.01),
        alpha_s,
        omega_floor: floor,
        ..Default::default()
    };
    let mut m = LayerParams::init(&hp, &mut rng);
    m.w_c = Matrix::random_normal(hp.channels, 2 * hp.channels, 3.0, &mut rng);
    m.b_c = (0..hp.channels).map(|_| rng.random_range(-8.0..8.0)).collect();
    let t = rng.random_range(1..400);
    let p = rng.random_range(0.0..1.0);
    let mut seq = SpikeSequence::zeros(t, hp.channels, 0);
    for i in 0..t {
        for c in 0..hp.channels {
            seq.set(i, c, rng.random_bool(p));
        }
    }
    let tape = forward_sequence(&seq, &m, &hp, true).unwrap().tape.unwrap();
    (tape, m, hp)
}

#[test]
fn state_bounds_hold_over_random_runs() {
    for seed in 0..1000 {
        let floor = if seed % 2 == 0 { 0.0 } else { 0.1 };
        let (tape, m, hp) = random_run(seed, floor);
        let r = check_bounds(&tape, &m, &hp).unwrap();
        assert!(r.all_ok(), "seed {seed}: {r:?}");
    }
}

#[test]
fn floored_controller_never_goes_below_the_floor() {
    let hp = ModelHyperparams { channels: 2, omega_floor: 0.1, ..Default::default() };
    let w_c = Matrix::from_rows(&[vec![-50.0, 0.0, -50.0, 0.0], vec![0.0; 4]]);
    let om = warp_factor(&[1.0, 0.0], &[10.0, 0.0], &w_c, &[-50.0, 0.0], &hp).unwrap();
    assert!(om[0] >= 0.1 && om[0] < 0.1 + 1e-12);
}

proptest! {
    #[test]
    fn kernel_stays_between_fixed_decay_and_one(seed in any::<u64>(), n in 2usize..200, alpha in 0.5f64..0.9999) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sched = random_schedule(&mut rng, n);
        let k = kernel_matrix(&sched, alpha).unwrap();
        for t in 0..=n {
            prop_assert_eq!(k.get(t, t), 1.0);
            for j in 0..t {
                let fixed = alpha.powi((t - j) as i32);
                let kap = k.get(t, j);
                prop_assert!(kap >= fixed - 1e-12 && kap <= 1.0 + 1e-12);
                // Any warp below one in the window gives strictly more weight.
                if (j + 1..=t).any(|m| sched.at(m) < 1.0 - 1e-9) {
                    prop_assert!(kap > fixed);
                }
                prop_assert!((kap - k.get(t, j + 1) * alpha.powf(sched.at(j + 1))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_equals_decay_to_the_effective_time(seed in any::<u64>(), n in 1usize..300, alpha in 0.5f64..0.9999) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sched = random_schedule(&mut rng, n);
        let k = kernel_matrix(&sched, alpha).unwrap();
        let mut last = 0.0;
        let j = rng.random_range(0..=n);
        for t in j..=n {
            let tau = effective_time(&sched, j, t).unwrap();
            prop_assert!(tau >= last);
            last = tau;
            prop_assert!((k.get(t, j) - alpha.powf(tau)).abs() <= 1e-12);
        }
    }

    #[test]
    fn nonconstant_schedules_always_have_a_witness(seed in any::<u64>(), n in 2usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sched = random_schedule(&mut rng, n);
        let w = check_nonstationarity(&sched, 0.95).unwrap().unwrap();
        prop_assert!(w.difference() > 1e-9);
        let (a, b) = w.implied_decays();
        prop_assert!((a - b).abs() > 0.0);
    }

    #[test]
    fn constant_schedules_have_no_witness(c in 1e-3f64..=1.0, n in 2usize..100) {
        prop_assert!(check_nonstationarity(&WarpSchedule::constant(c, n).unwrap(), 0.95).unwrap().is_none());
    }

    #[test]
    fn retention_plans_verify_whenever_feasible(alpha in 0.9f64..0.999, l in 1usize..200, eps in 0.05f64..0.95) {
        match construct_retention_schedule(alpha, l, eps) {
            Ok(plan) => prop_assert!(verify_retention(&plan).unwrap().passed()),
            Err(_) => prop_assert!(alpha.powi(l as i32) <= eps),
        }
    }
}

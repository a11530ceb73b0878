use fluctuation::simulate::noise::{stream_rng, RngNoise, Scripted};
use fluctuation::simulate::oracle::{event_passage, grid_passage, SharedPath};
use fluctuation::simulate::{
    read_csv, sample_conditional, sample_killed, sample_killed_naive, simulate_first_passage, stable_increments,
    write_csv, KilledSubordinator, Method, Outcome, SampleRequest, SimBudget, DEFAULT_FRACTIONS,
};
use fluctuation::{JumpFamily, ModelSpec, NegativeComponent};

fn pareto_drift(beta: f64, c: f64) -> ModelSpec {
    ModelSpec::new(JumpFamily::Pareto { beta, scale: 1.0 }, 1.0, NegativeComponent::Drift { rate: c }).unwrap()
}

fn pareto_stable() -> ModelSpec {
    ModelSpec::new(
        JumpFamily::Pareto { beta: 2.5, scale: 1.0 },
        1.0,
        NegativeComponent::StableSubordinator { index: 0.5, scale: 1.0 },
    )
    .unwrap()
}

fn passage(o: Outcome) -> fluctuation::simulate::FirstPassageSample {
    match o {
        Outcome::Passage(s) => s,
        Outcome::NoPassage(np) => panic!("no passage: {np:?}"),
    }
}

fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn scripted_single_jump() {
    let m = pareto_drift(2.5, 1.0);
    let mut n = Scripted::new(&[1.0], &[5.0]);
    let s = passage(simulate_first_passage(&m, 3.0, &mut n, &SimBudget::default(), &[1.0]).unwrap());
    assert_eq!((s.tau, s.z, s.o), (1.0, 1.0, 1.0));
    assert_eq!(s.snapshots, vec![(1.0, 1.0)]);
}

#[test]
fn scripted_two_jumps() {
    let m = pareto_drift(2.5, 1.0);
    let mut n = Scripted::new(&[1.0, 1.0], &[2.0, 10.0]);
    let s = passage(simulate_first_passage(&m, 3.0, &mut n, &SimBudget::default(), &DEFAULT_FRACTIONS).unwrap());
    assert_eq!((s.tau, s.z, s.o), (2.0, 0.0, 7.0));
    // X(0.5) = -0.5, X(1) = 1, X(1.5) = 0.5
    assert_eq!(s.snapshots, vec![(0.25, 0.5), (0.5, -1.0), (0.75, -0.5)]);
}

#[test]
fn scripted_stream_end_is_no_passage() {
    let m = pareto_drift(2.5, 1.0);
    let mut n = Scripted::new(&[1.0], &[1.5]);
    let o = simulate_first_passage(&m, 3.0, &mut n, &SimBudget::default(), &[]).unwrap();
    let Outcome::NoPassage(np) = o else { panic!() };
    assert_eq!(np.infimum, -1.0);
    assert_eq!(np.position, 0.5);
}

#[test]
fn scripted_negative_marks() {
    let m = ModelSpec::new(
        JumpFamily::Pareto { beta: 2.5, scale: 1.0 },
        1.0,
        NegativeComponent::CompoundPoisson { jumps: JumpFamily::Weibull { kappa: 1.0, scale: 1.0 }, rate: 2.0 },
    )
    .unwrap();
    let mut n = Scripted::new(&[0.5, 0.5, 1.0], &[1.0, 6.0]);
    n.marks = [true, false, true].into_iter().collect();
    n.negative = [2.5].into_iter().collect();
    let s = passage(simulate_first_passage(&m, 3.0, &mut n, &SimBudget::default(), &[0.5]).unwrap());
    assert_eq!((s.tau, s.z, s.o), (2.0, 1.5, 1.5));
    assert_eq!(s.snapshots, vec![(0.5, 1.5)]);
}

#[test]
fn stable_increment_laplace_transform() {
    let n = 1_000_000;
    let xs = stable_increments(0.5, 1.0, n, &mut stream_rng(3, 0)).unwrap();
    assert!(xs.iter().all(|&x| x > 0.0));
    let v: Vec<f64> = xs.iter().map(|x| (-x).exp()).collect();
    let m = v.iter().sum::<f64>() / n as f64;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se = sd / (n as f64).sqrt();
    assert!((m - (-1.0f64).exp()).abs() < 3.0 * se, "{m}");
}

#[test]
fn stable_increment_small_time_median() {
    let mut xs = stable_increments(0.5, 1e-6, 10_001, &mut stream_rng(4, 0)).unwrap();
    xs.sort_by(f64::total_cmp);
    assert!(xs[5000] < 1e-4, "{}", xs[5000]);
}

#[test]
fn conditional_sampling_is_deterministic_across_workers() {
    let m = pareto_drift(2.5, 2.0);
    let mut req = SampleRequest::new(400, 7);
    req.workers = 4;
    let a = sample_conditional(&m, 50.0, &req).unwrap();
    let b = sample_conditional(&m, 50.0, &req).unwrap();
    req.workers = 1;
    let c = sample_conditional(&m, 50.0, &req).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let mut bytes_a = Vec::new();
    let mut bytes_c = Vec::new();
    write_csv(&a.samples, 3, &mut bytes_a).unwrap();
    write_csv(&c.samples, 3, &mut bytes_c).unwrap();
    assert_eq!(bytes_a, bytes_c);
}

#[test]
fn passage_probability_decreases_in_level() {
    let m = pareto_drift(2.5, 2.0);
    let req = SampleRequest::new(2000, 11);
    let p: Vec<f64> =
        [10.0, 50.0, 200.0].iter().map(|&u| sample_conditional(&m, u, &req).unwrap().report.p_hat).collect();
    assert!(p[0] > p[1] && p[1] > p[2], "{p:?}");
}

#[test]
fn normalised_overshoot_mean_near_two() {
    let m = pareto_drift(2.5, 2.0);
    let req = SampleRequest::new(20_000, 12);
    let r = sample_conditional(&m, 200.0, &req).unwrap();
    assert!(!r.report.shortfall);
    assert!(r.samples.iter().all(|s| s.o > 0.0 && s.z > -200.0));
    let mean = r.samples.iter().map(|s| s.o / 200.0).sum::<f64>() / r.samples.len() as f64;
    // heavy right tail: infinite variance, so a loose band
    assert!((mean - 2.0).abs() < 0.3, "{mean}");
}

#[test]
fn snapshot_at_one_is_undershoot() {
    let m = pareto_drift(2.5, 2.0);
    let mut req = SampleRequest::new(200, 13);
    req.fractions = vec![0.5, 1.0];
    for (model, u) in [(m, 20.0), (pareto_stable(), 20.0)] {
        let r = sample_conditional(&model, u, &req).unwrap();
        for s in &r.samples {
            assert!((s.snapshots[1].1 - s.z).abs() <= 1e-12);
            assert!(s.snapshots[0].1.is_finite());
        }
    }
}

#[test]
fn inclusion_monotonicity_with_common_numbers() {
    let m = pareto_drift(2.5, 2.0);
    let b = SimBudget::default();
    for i in 0..500 {
        let lo = simulate_first_passage(&m, 2.0, &mut RngNoise(stream_rng(21, i)), &b, &[]).unwrap();
        let hi = simulate_first_passage(&m, 8.0, &mut RngNoise(stream_rng(21, i)), &b, &[]).unwrap();
        if hi.passed() {
            assert!(lo.passed(), "path {i}");
        }
    }
}

#[test]
fn event_simulator_agrees_with_fine_grid() {
    let m = pareto_drift(2.5, 2.0);
    let mut agree = 0;
    for i in 0..1000 {
        let p = SharedPath::generate(&m, 20.0, &mut stream_rng(31, i));
        if event_passage(&m, &p, 0.5).unwrap() == grid_passage(&m, &p, 0.5, 1e-5).unwrap() {
            agree += 1;
        }
    }
    assert_eq!(agree, 1000);
}

#[test]
fn passage_probability_matches_grid_oracle() {
    let m = pareto_drift(2.5, 2.0);
    let n = 20_000;
    let hits = (0..n)
        .filter(|&i| {
            let p = SharedPath::generate(&m, 200.0, &mut stream_rng(41, i));
            grid_passage(&m, &p, 0.5, 1e-4).unwrap()
        })
        .count();
    let freq = hits as f64 / n as f64;
    let se = (freq * (1.0 - freq) / n as f64).sqrt();
    let r = sample_conditional(&m, 0.5, &SampleRequest::new(20_000, 42)).unwrap();
    let se2 = (r.report.p_ci.1 - r.report.p_ci.0) / 3.92;
    assert!((r.report.p_hat - freq).abs() < 3.0 * (se * se + se2 * se2).sqrt(), "{} vs {freq}", r.report.p_hat);
}

#[test]
fn chain_sampler_matches_direct_rejection() {
    let m = pareto_drift(2.5, 2.0);
    let mut req = SampleRequest::new(4000, 51);
    let chain = sample_conditional(&m, 5.0, &req).unwrap();
    req.method = Method::Direct;
    req.seed = 52;
    let direct = sample_conditional(&m, 5.0, &req).unwrap();
    let (pc, pd) = (chain.report.p_hat, direct.report.p_hat);
    assert!(pd >= chain.report.p_ci.0 * 0.9 && pd <= chain.report.p_ci.1 * 1.1, "{pc} vs {pd}");
    let crit = 1.95 * (2.0 / 4000.0f64).sqrt();
    let get = |r: &fluctuation::simulate::ConditionalSamples, k: usize| -> Vec<f64> {
        r.samples.iter().map(|s| [s.z, s.o, s.tau, s.snapshots[1].1][k]).collect()
    };
    for k in 0..4 {
        let d = two_sample_ks(&get(&chain, k), &get(&direct, k));
        assert!(d < crit, "column {k}: {d}");
    }
}

#[test]
fn forced_stable_sampler_matches_direct_rejection() {
    let m = pareto_stable();
    let mut req = SampleRequest::new(3000, 61);
    let forced = sample_conditional(&m, 3.0, &req).unwrap();
    req.method = Method::Direct;
    req.seed = 62;
    let direct = sample_conditional(&m, 3.0, &req).unwrap();
    let (pf, pd) = (forced.report.p_hat, direct.report.p_hat);
    let sf = (forced.report.p_ci.1 - forced.report.p_ci.0) / 3.92;
    let sd = (direct.report.p_ci.1 - direct.report.p_ci.0) / 3.92;
    assert!((pf - pd).abs() < 3.5 * (sf * sf + sd * sd).sqrt(), "{pf} vs {pd}");
    let crit = 1.95 * (2.0 / 3000.0f64).sqrt();
    let get = |r: &fluctuation::simulate::ConditionalSamples, k: usize| -> Vec<f64> {
        r.samples.iter().map(|s| [s.z, s.o, s.tau, s.snapshots[1].1][k]).collect()
    };
    for k in 0..4 {
        let d = two_sample_ks(&get(&forced, k), &get(&direct, k));
        assert!(d < crit, "column {k}: {d}");
    }
}

#[test]
fn killed_chain_matches_naive_rejection() {
    let k = KilledSubordinator { jumps: JumpFamily::Pareto { beta: 1.5, scale: 1.0 }, rate: 1.0, kill: 0.2 };
    let a = sample_killed(&k, 20.0, 3000, 71, 2, 1_000_000).unwrap();
    let b = sample_killed_naive(&k, 20.0, 3000, 72, 1_000_000).unwrap();
    let d = two_sample_ks(
        &a.passages.iter().map(|p| p.overshoot).collect::<Vec<_>>(),
        &b.passages.iter().map(|p| p.overshoot).collect::<Vec<_>>(),
    );
    assert!(d < 1.95 * (2.0 / 3000.0f64).sqrt(), "{d}");
    let se = (b.p_hat * (1.0 - b.p_hat) / b.attempts as f64).sqrt();
    assert!((a.p_hat - b.p_hat).abs() < 4.0 * se, "{} vs {}", a.p_hat, b.p_hat);
}

#[test]
fn csv_round_trip() {
    let m = pareto_drift(2.5, 2.0);
    let r = sample_conditional(&m, 10.0, &SampleRequest::new(50, 81)).unwrap();
    let mut buf = Vec::new();
    write_csv(&r.samples, 3, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("replicate,u,tau,Z,O,s1,x1,s2,x2,s3,x3,attempts\n"));
    assert!(!text.contains('\r'));
    assert_eq!(read_csv(&text).unwrap(), r.samples);
}

#[test]
fn bad_inputs_are_rejected() {
    let m = pareto_drift(2.5, 2.0);
    assert!(sample_conditional(&m, -1.0, &SampleRequest::new(5, 1)).is_err());
    assert!(sample_conditional(&m, 1.0, &SampleRequest::new(0, 1)).is_err());
    let mut req = SampleRequest::new(5, 1);
    req.workers = 0;
    assert!(sample_conditional(&m, 1.0, &req).is_err());
    req.workers = 1;
    req.fractions = vec![1.5];
    assert!(sample_conditional(&m, 1.0, &req).is_err());
}

use fluctuation::ladder::*;
use fluctuation::simulate::KilledSubordinator;
use fluctuation::{Error, JumpFamily};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn calibration() -> WalkSpec {
    WalkSpec::new(
        0.3,
        JumpFamily::Pareto { beta: 3.0, scale: 1.0 },
        NegativeStep::Law(JumpFamily::Weibull { kappa: 1.0, scale: 0.65 / 0.7 }),
    )
    .unwrap()
}

fn levels() -> Vec<f64> {
    (0..9).map(|i| 1.0 + 0.5 * i as f64).collect()
}

fn estimate(n: u64, seed: u64) -> LadderEstimate {
    estimate_ladder(&calibration(), &LadderConfig::new(n, seed)).unwrap()
}

#[test]
fn calibration_walk_mean() {
    assert!((calibration().mean() + 0.5).abs() < 1e-12);
}

#[test]
fn degenerate_walk() {
    let w = WalkSpec::new(0.0, JumpFamily::Pareto { beta: 3.0, scale: 1.0 }, NegativeStep::Constant(1.0)).unwrap();
    let mut cfg = LadderConfig::new(100, 1);
    cfg.grid = GridSpec { lo: 1.0, hi: 16.0, cells: 4 };
    let e = estimate_ladder(&w, &cfg).unwrap();
    assert_eq!(e.killing, KillingEstimate::NoStrictLadder);
    assert_eq!(e.p_hat, 0.0);
    assert!(e.pi_h_tail.iter().all(|g| g.value == 0.0));
    for g in &e.gstar {
        assert_eq!(g.value, 1.0 + g.x.floor(), "x = {}", g.x);
        assert_eq!(g.se, 0.0);
    }
    assert_eq!(e.mean_hstar.value, 1.0);
}

#[test]
fn nonnegative_mean_rejected() {
    // E S_1 = 0.5 * 0.5 - 0.5 * 0.5 = 0
    let r = WalkSpec::new(0.5, JumpFamily::Pareto { beta: 3.0, scale: 1.0 }, NegativeStep::Constant(0.5));
    assert!(matches!(r, Err(Error::Model(_))));
    let r = WalkSpec::new(0.5, JumpFamily::Pareto { beta: 3.0, scale: 1.0 }, NegativeStep::Constant(0.1));
    assert!(matches!(r, Err(Error::Model(_))));
    assert!(WalkSpec::new(1.0, JumpFamily::Pareto { beta: 3.0, scale: 1.0 }, NegativeStep::Constant(9.0)).is_err());
}

#[test]
fn bad_config_rejected() {
    let mut cfg = LadderConfig::new(10, 1);
    cfg.batches = 20;
    assert!(matches!(estimate_ladder(&calibration(), &cfg), Err(Error::Config(_))));
    let mut cfg = LadderConfig::new(100, 1);
    cfg.grid = GridSpec { lo: 2.0, hi: 1.0, cells: 4 };
    assert!(matches!(estimate_ladder(&calibration(), &cfg), Err(Error::Grid(_))));
}

/// P(some S_n > 0, n ≤ horizon) by plain simulation, no depth rule.
fn brute_force_p(walk: &WalkSpec, paths: u64, horizon: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..paths {
        let mut s = 0.0;
        for _ in 0..horizon {
            let step = if rng.random::<f64>() < walk.p_plus {
                let v: f64 = rng.random();
                (1.0 - v).powf(-1.0 / 3.0) - 1.0
            } else {
                let v: f64 = rng.random();
                (0.65 / 0.7) * (1.0 - v).ln()
            };
            s += step;
            if s > 0.0 {
                hits += 1;
                break;
            }
        }
    }
    let p = hits as f64 / paths as f64;
    (p, (p * (1.0 - p) / paths as f64).sqrt())
}

#[test]
fn killing_rate_matches_brute_force() {
    let e = estimate(100_000, 11);
    let KillingEstimate::Rate { q, se } = e.killing else { panic!("expected a rate") };
    let (p, pse) = brute_force_p(&calibration(), 100_000, 1_000, 99);
    let comb = (se * se + pse * pse).sqrt();
    assert!((q - (1.0 - p)).abs() <= 3.0 * comb, "q {q} vs {} (se {comb})", 1.0 - p);
    assert!(q > 0.0);
    assert!(e.horizon_ok());
    assert_eq!(e.horizon_stop_fraction, 0.0);
}

#[test]
fn estimate_shapes() {
    let e = estimate(50_000, 3);
    assert!(e.pi_h_tail.windows(2).all(|w| w[1].value <= w[0].value));
    assert!(e.pi_hstar_tail.windows(2).all(|w| w[1].value <= w[0].value));
    assert!(e.gstar.windows(2).all(|w| w[1].value >= w[0].value));
    assert!(e.gstar[0].value >= 1.0);
    assert!(e.a_hstar.windows(2).all(|w| w[1].value >= w[0].value));
    assert!(e.pi_h_tail.iter().chain(&e.gstar).all(|g| g.se.is_finite()));
}

#[test]
fn vigon_identities_on_calibration_walk() {
    let e = estimate(200_000, 5);
    let us = levels();
    for (name, rows) in [
        ("inverse", check_vigon_inverse(&e, &us).unwrap()),
        ("positive", check_vigon_positive(&e, &us).unwrap()),
        ("negative", check_vigon_negative(&e, &us).unwrap()),
    ] {
        for r in rows {
            assert!(r.pass, "{name} at u = {}: {r:?}", r.u);
        }
    }
    let k = check_killing_consistency(&e);
    assert!(k.pass, "{k:?}");
    let m = check_mean_identity(&e).unwrap();
    assert!(m.pass, "{m:?}");
}

#[test]
fn joint_band_is_wider() {
    let e = estimate(20_000, 14);
    let us = levels();
    let all = check_vigon_all(&e, &us).unwrap();
    let one = check_vigon_negative(&e, &us).unwrap();
    for (a, b) in all.negative.iter().zip(&one) {
        assert_eq!((a.diff, a.se), (b.diff, b.se));
        assert!(a.crit > b.crit);
        assert!(a.pass || !b.pass);
    }
    assert_eq!(all.inverse.len(), 9);
    assert_eq!(all.pass(), all.inverse.iter().chain(&all.positive).chain(&all.negative).all(|r| r.pass));
}

#[test]
fn negative_identity_dominates_killing_term() {
    let e = estimate(50_000, 6);
    let q = e.killing.q();
    for r in check_vigon_negative(&e, &levels()).unwrap() {
        let hs = e.pi_hstar_tail.iter().find(|g| g.x >= r.u).unwrap();
        // the killing term alone, evaluated at a grid point no smaller than u
        assert!(r.rhs + 1e-12 >= q * hs.value * 0.9, "{r:?}");
    }
}

#[test]
fn zero_positive_tail_gives_zero() {
    let e = estimate(20_000, 7);
    for r in check_vigon_inverse_with(&e, &|_| 0.0, &levels()).unwrap() {
        assert_eq!(r.rhs, 0.0);
    }
}

#[test]
fn inverse_rhs_nonincreasing() {
    let e = estimate(20_000, 8);
    let us: Vec<f64> = e.grid.clone();
    let rows = check_vigon_inverse(&e, &us).unwrap();
    assert!(rows.windows(2).all(|w| w[1].rhs <= w[0].rhs));
}

#[test]
fn out_of_range_level_rejected() {
    let e = estimate(2_000, 9);
    assert!(matches!(check_vigon_inverse(&e, &[25.0]), Err(Error::Grid(_))));
    assert!(matches!(check_vigon_positive(&e, &[0.01]), Err(Error::Grid(_))));
    assert!(matches!(check_vigon_negative(&e, &[f64::NAN]), Err(Error::Grid(_))));
}

#[test]
fn prop_ratio_indeterminate_below_one() {
    let e = estimate(2_000, 10);
    let rows = check_prop_q(&e, &[0.5, 1.0, 2.0]).unwrap();
    assert!(rows[0].ratio.is_none() && rows[1].ratio.is_none());
    assert!(rows[2].ratio.unwrap() > 0.0);
}

#[test]
fn prop_ratio_infinite_mean_walk() {
    let w = WalkSpec::new(
        0.3,
        JumpFamily::Pareto { beta: 3.0, scale: 1.0 },
        NegativeStep::Law(JumpFamily::Pareto { beta: 0.3, scale: 1.0 }),
    )
    .unwrap();
    assert_eq!(w.mean(), f64::NEG_INFINITY);
    let e = estimate_ladder(&w, &LadderConfig::new(100_000, 12)).unwrap();
    assert!(matches!(check_mean_identity(&e), Err(Error::Domain(_))));
    let xs = [2.0, 5.0, 10.0, 20.0];
    let rows = check_prop_q(&e, &xs).unwrap();
    let last = rows.last().unwrap();
    assert!((last.ratio.unwrap() / last.q_hat - 1.0).abs() <= 0.1, "{last:?}");
    assert!(rows.windows(2).all(|r| r[1].ratio.unwrap() > r[0].ratio.unwrap()));
}

#[test]
fn renewal_slope() {
    let e = estimate(100_000, 13);
    let (s, se) = gstar_slope(&e, 10.0, 20.0).unwrap();
    let target = 1.0 / e.mean_hstar.value;
    assert!((s / target - 1.0).abs() <= 0.1, "slope {s} ± {se} vs {target}");
    assert!(matches!(gstar_slope(&e, 20.0, 10.0), Err(Error::Grid(_))));
}

#[test]
fn deterministic_across_workers() {
    let mut cfg = LadderConfig::new(20_000, 21);
    let a = serde_json::to_string(&estimate_ladder(&calibration(), &cfg).unwrap()).unwrap();
    cfg.workers = 3;
    let b = serde_json::to_string(&estimate_ladder(&calibration(), &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn killed_subordinator_counts_early_kills() {
    let sub = KilledSubordinator { jumps: JumpFamily::Pareto { beta: 1.5, scale: 1.0 }, rate: 0.2, kill: 0.2 };
    let r = overshoot_killed_subordinator(&sub, 5.0, 500, 4, 1, KilledMethod::Rejection).unwrap();
    assert_eq!(r.normalized.len(), 500);
    assert!(r.killed_before_first_jump > 0);
    assert!(r.killed_before_first_jump <= r.attempts - 500);
    assert!(r.normalized.iter().all(|&o| o > 0.0));
    let c = overshoot_killed_subordinator(&sub, 5.0, 500, 4, 1, KilledMethod::Chain).unwrap();
    assert_eq!(c.killed_before_first_jump, 0);
    assert!((c.p_hat / r.p_hat - 1.0).abs() < 0.2, "{} vs {}", c.p_hat, r.p_hat);
}

#[test]
fn killed_subordinator_requires_killing() {
    let sub = KilledSubordinator { jumps: JumpFamily::Pareto { beta: 1.5, scale: 1.0 }, rate: 1.0, kill: 0.0 };
    assert!(overshoot_killed_subordinator(&sub, 5.0, 10, 4, 1, KilledMethod::Chain).is_err());
}

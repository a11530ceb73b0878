use fluctuation::limit_laws::*;
use fluctuation::quad::{integrate_positive, QuadOptions};
use fluctuation::Case;
use proptest::prelude::*;

fn opts() -> QuadOptions {
    QuadOptions::rel(1e-11).with_abs(1e-300)
}

#[test]
fn every_density_has_unit_mass() {
    let laws = [
        LimitLaw::PassageLocal { case: Case::I, beta: 2.5 },
        LimitLaw::PassageLocal { case: Case::II, beta: 2.5 },
        LimitLaw::JointVu { case: Case::I, beta: 2.5 },
        LimitLaw::JointVu { case: Case::II, beta: 2.5 },
        LimitLaw::Overshoot { case: Case::I, alpha: 0.5 },
        LimitLaw::Overshoot { case: Case::II, alpha: 1.0 },
        LimitLaw::JointVuw(LawParams::new(Case::I, 2.5, 0.5).unwrap()),
        LimitLaw::JointVuw(LawParams::new(Case::II, 1.0, 0.5).unwrap()),
        LimitLaw::MarginalVu(LawParams::new(Case::I, 2.5, 0.5).unwrap()),
        LimitLaw::MarginalVu(LawParams::new(Case::II, 1.0, 0.3).unwrap()),
        LimitLaw::MarginalW(LawParams::new(Case::I, 2.5, 0.5).unwrap()),
        LimitLaw::MarginalW(LawParams::new(Case::II, 1.0, 0.5).unwrap()),
    ];
    for law in &laws {
        let m = law.total_mass().unwrap();
        assert!((m - 1.0).abs() < 1e-6, "{law:?}: {m}");
    }
}

#[test]
fn u_marginal_of_gamma0_joint_is_overshoot_law() {
    for &beta in &[1.5, 2.0, 2.5, 4.0] {
        for &x in &[0.0, 0.3, 1.0, 5.0, 40.0] {
            let q = integrate_positive(|z| joint_vu_gamma0(Case::I, beta, z, x).unwrap(), opts()).unwrap();
            let target = overshoot_limit(Case::I, beta - 1.0, x).unwrap();
            assert!((q.value - target).abs() < 1e-8 * target.max(1e-3), "beta {beta} x {x}");
        }
    }
}

#[test]
fn v_marginal_is_h_mixture_of_f() {
    let p = LawParams::new(Case::I, 2.5, 0.5).unwrap();
    for &z in &[0.1, 0.5, 1.0, 3.0] {
        // ∫∫ J11 dx dt at fixed z, with the t-integral done numerically
        let ht = integrate_positive(
            |t| fluctuation::stable_law::density_h(fluctuation::stable_law::StableIndex::new(0.5).unwrap(), t, z).unwrap(),
            opts(),
        )
        .unwrap()
        .value;
        let v = undershoot_f(&p, z).unwrap() * ht;
        assert!((v - v_marginal_density(&p, z).unwrap()).abs() < 1e-8, "z {z}");
    }
}

#[test]
fn case_two_factorises() {
    let p = LawParams::new(Case::II, 1.0, 0.4).unwrap();
    for i in 1..10 {
        for j in 0..10 {
            let (z, x) = (0.35 * i as f64, 0.5 * j as f64);
            let joint = marginal_vu(&p, z, x).unwrap();
            let prod = v_marginal_density(&p, z).unwrap() * u_marginal_density(&p, x).unwrap();
            assert!((joint - prod).abs() < 1e-10 * joint.max(1e-300));
        }
    }
}

#[test]
fn w_density_small_t_limit() {
    let p = LawParams::new(Case::II, 1.0, 0.5).unwrap();
    assert!((w_density(&p, 1e-12).unwrap() - 1.0).abs() < 1e-5);
    let pi = LawParams::new(Case::I, 2.0, 0.5).unwrap();
    let idx = fluctuation::stable_law::StableIndex::new(0.5).unwrap();
    let q = integrate_positive(|z| fluctuation::stable_law::h1(idx, z).unwrap() / (1.0 + z).powi(2), opts()).unwrap();
    let want = fluctuation::special::gamma(2.0) / fluctuation::special::gamma(1.5) * q.value;
    assert!((w_density(&pi, 1.0).unwrap() - want).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdfs_are_monotone(beta in 1.05f64..6.0, g in 0.0f64..0.95, a in 0.0f64..50.0, d in 0.0f64..50.0) {
        let p = LawParams::new(Case::I, beta, g).unwrap();
        let (lo, hi) = (a, a + d);
        prop_assert!(v_marginal_cdf(&p, lo).unwrap() <= v_marginal_cdf(&p, hi).unwrap());
        prop_assert!(u_marginal_cdf(&p, lo).unwrap() <= u_marginal_cdf(&p, hi).unwrap());
        prop_assert!(passage_local_gamma0_cdf(Case::I, beta, lo).unwrap() <= passage_local_gamma0_cdf(Case::I, beta, hi).unwrap());
    }

    #[test]
    fn densities_nonnegative(beta in 1.05f64..6.0, g in 0.01f64..0.95, z in 0.0f64..20.0, x in 0.0f64..20.0) {
        let p = LawParams::new(Case::I, beta, g).unwrap();
        prop_assert!(marginal_vu(&p, z, x).unwrap() >= 0.0);
        prop_assert!(joint_vu_gamma0(Case::I, beta, z, x).unwrap() >= 0.0);
        prop_assert!(undershoot_f(&p, z).unwrap() > 0.0);
    }

    #[test]
    fn theta_vanishes_off_order(z1 in 0.1f64..3.0, dz in 0.0f64..2.0, t in 0.1f64..3.0) {
        let p = LawParams::new(Case::II, 1.0, 0.5).unwrap();
        prop_assert_eq!(fdd_theta(&p, &[z1 + dz, z1], &[0.5, 1.0], t).unwrap(), 0.0);
    }
}

//! Space norming a(u), time scale c(t), its inverse b(y), and r(u) = b(a(u)).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{Case, MeanClass, ModelSpec, NegativeComponent, RegimeTag};
use crate::special::gamma;

const MAX_BISECTIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum TimeScale {
    Linear { abs_mean: f64 },
    Stable { index: f64, scale: f64 },
    Winsorised,
}

/// Norming functions for one model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormingBundle {
    pub model: ModelSpec,
    pub regime: RegimeTag,
    time: TimeScale,
}

impl NormingBundle {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        let regime = model.classify()?;
        let time = match model.negative {
            NegativeComponent::StableSubordinator { index, scale } => TimeScale::Stable { index, scale },
            _ if regime.mean_class == MeanClass::FiniteMean => TimeScale::Linear { abs_mean: -model.mean_x1()? },
            _ => TimeScale::Winsorised,
        };
        Ok(Self { model: *model, regime, time })
    }

    /// Space norming: u in Case I, mean excess ∫_u^inf Π⁺ / Π⁺(u) in Case II.
    pub fn a(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return domain(format!("level must be > 0, got {u}"));
        }
        match self.regime.case {
            Case::I => Ok(u),
            Case::II => self.model.positive.mean_excess(u),
        }
    }

    /// Growth function of the dual process.
    pub fn c(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return domain(format!("time must be > 0, got {t}"));
        }
        match self.time {
            TimeScale::Linear { abs_mean } => Ok(abs_mean * t),
            TimeScale::Stable { index, scale } => Ok((scale * t).powf(1.0 / index)),
            TimeScale::Winsorised => solve_growth(t, |y| self.model.truncated_mean_neg(y)),
        }
    }

    /// Inverse of `c`.
    pub fn b(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return domain(format!("space level must be > 0, got {y}"));
        }
        match self.time {
            TimeScale::Linear { abs_mean } => Ok(y / abs_mean),
            TimeScale::Stable { index, scale } => Ok(y.powf(index) / scale),
            TimeScale::Winsorised => Ok(y / self.model.truncated_mean_neg(y)?),
        }
    }

    pub fn r(&self, u: f64) -> Result<f64> {
        self.b(self.a(u)?)
    }

    /// r(u) Γ(γ) Π⁻(a(u)); tends to 1 when γ in (0, 1).
    pub fn tail_time_ratio(&self, u: f64) -> Result<f64> {
        let g = self.regime.gamma;
        if g <= 0.0 {
            return domain("tail/time ratio is defined for gamma in (0, 1)");
        }
        let a = self.a(u)?;
        Ok(self.r(u)? * gamma(g) * self.model.neg_tail(a)?)
    }

    /// a(u + k a(u)) / a(u).
    pub fn self_neglect_ratio(&self, u: f64, k: f64) -> Result<f64> {
        let a = self.a(u)?;
        Ok(self.a(u + k * a)? / a)
    }
}

/// Largest root c of c = t A(c) on (1, inf) for a nondecreasing, sublinear A.
///
/// y / A(y) blows up at 1+ and at infinity, so the root on the increasing
/// branch is bracketed by a geometric scan and refined by bisection.
pub fn solve_growth<F: Fn(f64) -> Result<f64>>(t: f64, a_star: F) -> Result<f64> {
    let b = |y: f64| -> Result<f64> { Ok(y / a_star(y)?) };
    let mut below = None;
    let mut y = 1.0 + 1e-6;
    let mut prev_b = f64::INFINITY;
    for _ in 0..400 {
        y *= 1.5;
        let by = b(y)?;
        if by < t {
            below = Some(y);
        } else if below.is_some() && by >= t && by > prev_b {
            break;
        }
        prev_b = by;
    }
    let Some(lo0) = below else {
        return Err(Error::Root(format!("no solution of c = t A*(c) for t = {t}")));
    };
    let (mut lo, mut hi) = (lo0, lo0 * 1.5);
    if b(hi)? < t {
        return Err(Error::Root(format!("bracket scan exhausted at t = {t}")));
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let resid = (mid - t * a_star(mid)?) / mid;
        if resid.abs() <= 1e-12 {
            return Ok(mid);
        }
        if b(mid)? < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let resid = ((c - t * a_star(c)?) / c).abs();
    if resid <= 1e-9 {
        Ok(c)
    } else {
        Err(Error::Root(format!("residual {resid:e} after {MAX_BISECTIONS} bisections")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JumpFamily;

    fn weibull_drift() -> ModelSpec {
        ModelSpec::new(JumpFamily::Weibull { kappa: 0.5, scale: 1.0 }, 0.1, NegativeComponent::Drift { rate: 1.0 }).unwrap()
    }

    #[test]
    fn case_one_identity_norming() {
        let m = ModelSpec::new(JumpFamily::Pareto { beta: 2.5, scale: 1.0 }, 1.0, NegativeComponent::Drift { rate: 2.0 + 2.0 / 3.0 }).unwrap();
        let n = NormingBundle::new(&m).unwrap();
        assert_eq!(n.a(50.0).unwrap(), 50.0);
        assert!((n.r(100.0).unwrap() - 50.0).abs() < 1e-12);
        assert!((n.b(10.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn weibull_half_closed_form() {
        let n = NormingBundle::new(&weibull_drift()).unwrap();
        assert!((n.a(100.0).unwrap() - 22.0).abs() < 1e-10);
        let r = n.self_neglect_ratio(1e4, 1.0).unwrap();
        assert!((r - 1.0).abs() < 0.02);
    }

    #[test]
    fn stable_time_scale() {
        let m = ModelSpec::new(
            JumpFamily::Pareto { beta: 2.5, scale: 1.0 },
            1.0,
            NegativeComponent::StableSubordinator { index: 0.5, scale: 1.0 },
        )
        .unwrap();
        let n = NormingBundle::new(&m).unwrap();
        assert!((n.c(7.0).unwrap() - 49.0).abs() < 1e-12);
        assert!((n.b(n.c(7.0).unwrap()).unwrap() - 7.0).abs() < 1e-12);
        assert!((n.r(1e4).unwrap() - 100.0).abs() < 1e-10);
        assert!((n.tail_time_ratio(1e4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn growth_root_matches_quadratic() {
        // c = 3 * 2(sqrt c - 1): sqrt c = 3 + sqrt 3
        let c = solve_growth(3.0, |y| Ok(2.0 * (y.sqrt() - 1.0))).unwrap();
        let exact = (3.0f64 + 3f64.sqrt()).powi(2);
        assert!(((c - exact) / exact).abs() < 1e-10, "{c}");
    }
}

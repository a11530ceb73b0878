//! Parametric heavy-tailed Lévy models and their tail functionals.
//!
//! A model is `X_t = CP+_t - N_t` where `CP+` is compound Poisson with rate
//! `rate` and jump law [`JumpFamily`], and `N` is the negative component.
//! No Gaussian part.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::{integrate, integrate_upper, QuadOptions};
use crate::special::{gamma, gamma_p, gamma_q, ln_gamma_q, ln_norm_sf, upper_gamma_scaled};

fn quad_opts() -> QuadOptions {
    QuadOptions::rel(1e-10).with_abs(1e-300)
}

/// Jump-size law on (0, inf).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum JumpFamily {
    /// Survival (1 + x/s)^-beta.
    Pareto { beta: f64, scale: f64 },
    /// Survival exp(-(x/s)^kappa), kappa in (0, 1).
    Weibull { kappa: f64, scale: f64 },
    /// log J ~ N(mu, sigma^2).
    Lognormal { mu: f64, sigma: f64 },
}

impl JumpFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpFamily::Pareto { beta, scale } => beta > 0.0 && scale > 0.0 && beta.is_finite() && scale.is_finite(),
            JumpFamily::Weibull { kappa, scale } => kappa > 0.0 && kappa <= 1.0 && scale > 0.0 && scale.is_finite(),
            JumpFamily::Lognormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("bad jump family parameters {self:?}")))
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        self.ln_survival(x).exp()
    }

    pub fn ln_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            JumpFamily::Pareto { beta, scale } => -beta * (x / scale).ln_1p(),
            JumpFamily::Weibull { kappa, scale } => -(x / scale).powf(kappa),
            JumpFamily::Lognormal { mu, sigma } => ln_norm_sf((x.ln() - mu) / sigma),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            JumpFamily::Pareto { beta, scale } => beta / scale * (1.0 + x / scale).powf(-beta - 1.0),
            JumpFamily::Weibull { kappa, scale } => {
                let r = (x / scale).powf(kappa);
                kappa / x * r * (-r).exp()
            }
            JumpFamily::Lognormal { mu, sigma } => {
                let z = (x.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }

    /// Hazard f/S, evaluated stably in the tail.
    pub fn hazard(&self, x: f64) -> f64 {
        match *self {
            JumpFamily::Pareto { beta, scale } => beta / (scale + x),
            JumpFamily::Weibull { kappa, scale } => kappa / x * (x / scale).powf(kappa),
            JumpFamily::Lognormal { mu, sigma } => {
                let z = (x.ln() - mu) / sigma;
                let ln_pdf = -0.5 * z * z - (x * sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
                (ln_pdf - ln_norm_sf(z)).exp()
            }
        }
    }

    /// Mean jump size; `None` when infinite.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            JumpFamily::Pareto { beta, scale } => (beta > 1.0).then(|| scale / (beta - 1.0)),
            JumpFamily::Weibull { kappa, scale } => Some(scale * gamma(1.0 + 1.0 / kappa)),
            JumpFamily::Lognormal { mu, sigma } => Some((mu + 0.5 * sigma * sigma).exp()),
        }
    }

    /// Second moment; `None` when infinite.
    pub fn second_moment(&self) -> Option<f64> {
        match *self {
            JumpFamily::Pareto { beta, scale } => {
                (beta > 2.0).then(|| 2.0 * scale * scale / ((beta - 1.0) * (beta - 2.0)))
            }
            JumpFamily::Weibull { kappa, scale } => Some(scale * scale * gamma(1.0 + 2.0 / kappa)),
            JumpFamily::Lognormal { mu, sigma } => Some((2.0 * mu + 2.0 * sigma * sigma).exp()),
        }
    }

    /// ∫_1^x S(y) dy for x > 1.
    pub fn integral_from_one(&self, x: f64) -> Result<f64> {
        if !(x > 1.0) {
            return domain(format!("truncated mean needs x > 1, got {x}"));
        }
        Ok(match *self {
            JumpFamily::Pareto { beta, scale } => {
                if (beta - 1.0).abs() < 1e-12 {
                    scale * ((scale + x) / (scale + 1.0)).ln()
                } else {
                    let e = 1.0 - beta;
                    scale / e * ((1.0 + x / scale).powf(e) - (1.0 + 1.0 / scale).powf(e))
                }
            }
            JumpFamily::Weibull { kappa, scale } => {
                let a = 1.0 / kappa;
                let lo = (1.0 / scale).powf(kappa);
                let hi = (x / scale).powf(kappa);
                let g = scale / kappa * gamma(a);
                if lo > a + 1.0 {
                    g * (gamma_q(a, lo) - gamma_q(a, hi))
                } else {
                    g * (gamma_p(a, hi) - gamma_p(a, lo))
                }
            }
            JumpFamily::Lognormal { .. } => integrate(|y| self.survival(y), 1.0, x, quad_opts())?.value,
        })
    }

    /// ∫_u^inf S(y) dy / S(u), the mean excess at u.
    pub fn mean_excess(&self, u: f64) -> Result<f64> {
        let u = u.max(0.0);
        match *self {
            JumpFamily::Pareto { beta, scale } => {
                if beta <= 1.0 {
                    return Err(Error::Model("mean excess infinite for Pareto beta <= 1".into()));
                }
                Ok((scale + u) / (beta - 1.0))
            }
            JumpFamily::Weibull { kappa, scale } => {
                let y = (u / scale).powf(kappa);
                Ok(scale / kappa * upper_gamma_scaled(1.0 / kappa, y))
            }
            JumpFamily::Lognormal { .. } => {
                let l0 = self.ln_survival(u);
                let r = integrate_upper(|y| (self.ln_survival(y) - l0).exp(), u, quad_opts())?;
                Ok(r.value)
            }
        }
    }

    /// ln of the equilibrium survival ∫_o^inf S / E J.
    pub fn eq_ln_survival(&self, o: f64) -> f64 {
        if o <= 0.0 {
            return 0.0;
        }
        match *self {
            JumpFamily::Pareto { beta, scale } => -(beta - 1.0) * (o / scale).ln_1p(),
            JumpFamily::Weibull { kappa, scale } => ln_gamma_q(1.0 / kappa, (o / scale).powf(kappa)),
            JumpFamily::Lognormal { .. } => {
                let m = self.mean().unwrap_or(f64::INFINITY);
                match self.mean_excess(o) {
                    Ok(me) => self.ln_survival(o) + me.ln() - m.ln(),
                    Err(_) => f64::NAN,
                }
            }
        }
    }

    /// Equilibrium density S(o) / E J.
    pub fn eq_density(&self, o: f64) -> f64 {
        match self.mean() {
            Some(m) => self.survival(o) / m,
            None => 0.0,
        }
    }

    /// One draw from the law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpFamily::Pareto { beta, scale } => {
                let u: f64 = rng.random();
                scale * ((1.0 - u).powf(-1.0 / beta) - 1.0)
            }
            JumpFamily::Weibull { kappa, scale } => {
                let e: f64 = Exp1.sample(rng);
                scale * e.powf(1.0 / kappa)
            }
            JumpFamily::Lognormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
        }
    }

    /// One draw from the law conditioned on exceeding `y`.
    pub fn sample_above<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> f64 {
        if y <= 0.0 {
            return self.sample(rng);
        }
        match *self {
            JumpFamily::Pareto { beta, scale } => {
                let u: f64 = rng.random();
                (scale + y) * (1.0 - u).powf(-1.0 / beta) - scale
            }
            JumpFamily::Weibull { kappa, scale } => {
                let e: f64 = Exp1.sample(rng);
                scale * ((y / scale).powf(kappa) + e).powf(1.0 / kappa)
            }
            JumpFamily::Lognormal { mu, sigma } => {
                let z0 = (y.ln() - mu) / sigma;
                (mu + sigma * normal_tail(z0, rng)).exp()
            }
        }
    }

    /// One draw from the equilibrium law (density S/EJ).
    pub fn sample_equilibrium<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpFamily::Pareto { beta, scale } => {
                let u: f64 = rng.random();
                scale * ((1.0 - u).powf(-1.0 / (beta - 1.0)) - 1.0)
            }
            JumpFamily::Weibull { kappa, scale } => {
                let g: f64 = Gamma::new(1.0 / kappa, 1.0).expect("shape > 0").sample(rng);
                scale * g.powf(1.0 / kappa)
            }
            JumpFamily::Lognormal { mu, sigma } => {
                // size-biased jump, then uniform fraction
                let z: f64 = StandardNormal.sample(rng);
                let j = (mu + sigma * sigma + sigma * z).exp();
                let u: f64 = rng.random();
                u * j
            }
        }
    }

    /// Solve eq_ln_survival(o) = target for o in [lo, hi].
    pub fn eq_inverse(&self, target: f64, lo: f64, hi: f64) -> f64 {
        if let JumpFamily::Pareto { beta, scale } = *self {
            let o = scale * (-target / (beta - 1.0)).exp_m1();
            return o.clamp(lo, hi);
        }
        let m = self.mean().expect("finite mean");
        let mut a = lo;
        let mut b = if hi.is_finite() { hi } else { lo.max(1.0) * 2.0 };
        if !hi.is_finite() {
            while self.eq_ln_survival(b) > target {
                a = b;
                b *= 2.0;
            }
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let f = self.eq_ln_survival(x) - target;
            if f > 0.0 {
                a = x;
            } else {
                b = x;
            }
            // Newton step on ln Gbar: d/do = -S(o) / (E J Gbar(o))
            let d = -(self.ln_survival(x) - self.eq_ln_survival(x)).exp() / m;
            let mut nx = x - f / d;
            if !(nx > a && nx < b) || !nx.is_finite() {
                nx = 0.5 * (a + b);
            }
            if (nx - x).abs() <= 1e-14 * x.abs().max(1e-300) || b - a <= 1e-15 * b.abs() {
                return nx;
            }
            x = nx;
        }
        x
    }

    /// Equilibrium draw restricted to (lo, hi].
    pub fn sample_equilibrium_between<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> f64 {
        let llo = self.eq_ln_survival(lo);
        let lhi = if hi.is_finite() { self.eq_ln_survival(hi) } else { f64::NEG_INFINITY };
        let r = (lhi - llo).exp();
        let u: f64 = 1.0 - rng.random::<f64>();
        let target = llo + (r + u * (1.0 - r)).ln();
        self.eq_inverse(target, lo, hi)
    }

    pub fn is_regularly_varying(&self) -> bool {
        matches!(self, JumpFamily::Pareto { .. })
    }
}

/// Standard normal conditioned on exceeding `a`.
fn normal_tail<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a < 0.5 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > a {
                return z;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = a + e / alpha;
        let u: f64 = rng.random();
        if u.ln() <= -0.5 * (z - alpha) * (z - alpha) {
            return z;
        }
    }
}

/// The downward part of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NegativeComponent {
    Drift { rate: f64 },
    CompoundPoisson { jumps: JumpFamily, rate: f64 },
    /// `scale = 1` is the standard subordinator with Laplace exponent λ^index.
    StableSubordinator { index: f64, scale: f64 },
}

impl NegativeComponent {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NegativeComponent::Drift { rate } if rate > 0.0 && rate.is_finite() => Ok(()),
            NegativeComponent::CompoundPoisson { jumps, rate } if rate > 0.0 && rate.is_finite() => {
                jumps.validate()?;
                if let JumpFamily::Pareto { beta, .. } = jumps {
                    if beta < 1.0 {
                        return Err(Error::Model(
                            "negative compound Poisson with Pareto beta < 1 is outside the implemented regimes".into(),
                        ));
                    }
                }
                Ok(())
            }
            NegativeComponent::StableSubordinator { index, scale } if index > 0.0 && index < 1.0 && scale > 0.0 => Ok(()),
            _ => Err(Error::Model(format!("bad negative component {self:?}"))),
        }
    }

    /// Mean of the negative component per unit time (infinite for stable).
    pub fn mean_rate(&self) -> f64 {
        match *self {
            NegativeComponent::Drift { rate } => rate,
            NegativeComponent::CompoundPoisson { jumps, rate } => jumps.mean().map_or(f64::INFINITY, |m| rate * m),
            NegativeComponent::StableSubordinator { .. } => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Regularly varying positive tail.
    I,
    /// Gumbel domain positive tail.
    II,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanClass {
    FiniteMean,
    InfiniteMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeTag {
    pub case: Case,
    pub gamma: f64,
    pub mean_class: MeanClass,
    pub beta: Option<f64>,
}

impl RegimeTag {
    pub fn gamma_bar(&self) -> f64 {
        1.0 - self.gamma
    }
}

/// Drift coefficient and Gaussian variance in the finite-variation
/// representation of the triplet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub shift: f64,
    pub gaussian_variance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub positive: JumpFamily,
    /// Rate of positive jumps.
    pub rate: f64,
    pub negative: NegativeComponent,
}

impl ModelSpec {
    pub fn new(positive: JumpFamily, rate: f64, negative: NegativeComponent) -> Result<Self> {
        let m = Self { positive, rate, negative };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.positive.validate()?;
        self.negative.validate()?;
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::Model(format!("positive jump rate must be > 0, got {}", self.rate)));
        }
        let m = self.mean_x1()?;
        if !(m < 0.0) {
            return Err(Error::Model(format!("process does not drift to -inf (E X_1 = {m})")));
        }
        Ok(())
    }

    pub fn triplet(&self) -> Triplet {
        let shift = match self.negative {
            NegativeComponent::Drift { rate } => -rate,
            _ => 0.0,
        };
        Triplet { shift, gaussian_variance: 0.0 }
    }

    /// Π⁺(x) = rate · S(x).
    pub fn pos_tail(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return domain(format!("tail level must be > 0, got {x}"));
        }
        Ok(self.rate * self.positive.survival(x))
    }

    /// Π⁻(x).
    pub fn neg_tail(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return domain(format!("tail level must be > 0, got {x}"));
        }
        Ok(match self.negative {
            NegativeComponent::Drift { .. } => 0.0,
            NegativeComponent::CompoundPoisson { jumps, rate } => rate * jumps.survival(x),
            NegativeComponent::StableSubordinator { index, scale } => scale * x.powf(-index) / gamma(1.0 - index),
        })
    }

    /// A⁺(x) = ∫_1^x Π⁺.
    pub fn truncated_mean_pos(&self, x: f64) -> Result<f64> {
        Ok(self.rate * self.positive.integral_from_one(x)?)
    }

    /// A*(x) = ∫_1^x Π⁻.
    pub fn truncated_mean_neg(&self, x: f64) -> Result<f64> {
        if !(x > 1.0) {
            return domain(format!("truncated mean needs x > 1, got {x}"));
        }
        Ok(match self.negative {
            NegativeComponent::Drift { .. } => 0.0,
            NegativeComponent::CompoundPoisson { jumps, rate } => rate * jumps.integral_from_one(x)?,
            NegativeComponent::StableSubordinator { index, scale } => {
                let g = 1.0 - index;
                scale / gamma(g) * (x.powf(g) - 1.0) / g
            }
        })
    }

    /// E X_1, or -inf when the negative part has infinite mean.
    pub fn mean_x1(&self) -> Result<f64> {
        let up = match self.positive.mean() {
            Some(m) => self.rate * m,
            None => f64::INFINITY,
        };
        let down = self.negative.mean_rate();
        if down.is_infinite() {
            if let JumpFamily::Pareto { beta, .. } = self.positive {
                if let NegativeComponent::StableSubordinator { index, .. } = self.negative {
                    if beta <= index {
                        return Err(Error::Model(format!(
                            "Pareto beta = {beta} must exceed stable index {index}"
                        )));
                    }
                }
            }
            return Ok(f64::NEG_INFINITY);
        }
        if up.is_infinite() {
            return Err(Error::Model("infinite positive mean with finite negative mean".into()));
        }
        Ok(up - down)
    }

    pub fn classify(&self) -> Result<RegimeTag> {
        self.validate()?;
        let (gamma, mean_class) = match self.negative {
            NegativeComponent::Drift { .. } => (0.0, MeanClass::FiniteMean),
            NegativeComponent::CompoundPoisson { jumps, .. } => match jumps.mean() {
                Some(_) => (0.0, MeanClass::FiniteMean),
                None => (0.0, MeanClass::InfiniteMean),
            },
            NegativeComponent::StableSubordinator { index, .. } => (1.0 - index, MeanClass::InfiniteMean),
        };
        let (case, beta) = match self.positive {
            JumpFamily::Pareto { beta, .. } => {
                if !(beta > 1.0 - gamma) {
                    return Err(Error::Model(format!("need beta > 1 - gamma = {}, got beta = {beta}", 1.0 - gamma)));
                }
                if gamma == 0.0 && !(beta > 1.0) {
                    return Err(Error::Model(format!("need beta > 1 when gamma = 0, got {beta}")));
                }
                (Case::I, Some(beta))
            }
            JumpFamily::Weibull { kappa, .. } if kappa >= 1.0 => {
                return Err(Error::Model("positive Weibull jumps need kappa < 1 (subexponential)".into()));
            }
            _ => (Case::II, None),
        };
        Ok(RegimeTag { case, gamma, mean_class, beta })
    }

    pub fn stable_index(&self) -> Option<(f64, f64)> {
        match self.negative {
            NegativeComponent::StableSubordinator { index, scale } => Some((index, scale)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pareto_drift(beta: f64, rate: f64, c: f64) -> ModelSpec {
        ModelSpec::new(JumpFamily::Pareto { beta, scale: 1.0 }, rate, NegativeComponent::Drift { rate: c }).unwrap()
    }

    #[test]
    fn tails() {
        let m = pareto_drift(2.0, 1.0, 2.0);
        assert!((m.pos_tail(1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((pareto_drift(2.0, 3.0, 4.0).pos_tail(1e-300).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(m.neg_tail(5.0).unwrap(), 0.0);
        assert!(m.pos_tail(0.0).is_err());
        let w = ModelSpec::new(JumpFamily::Weibull { kappa: 0.5, scale: 1.0 }, 1.0, NegativeComponent::Drift { rate: 3.0 })
            .unwrap();
        assert!((w.pos_tail(4.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn negative_tails() {
        let s = ModelSpec::new(
            JumpFamily::Pareto { beta: 2.0, scale: 1.0 },
            1.0,
            NegativeComponent::StableSubordinator { index: 0.5, scale: gamma(0.5) },
        )
        .unwrap();
        assert!((s.neg_tail(4.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((s.truncated_mean_neg(4.0).unwrap() - 2.0).abs() < 1e-13);
        let cp = ModelSpec::new(
            JumpFamily::Pareto { beta: 2.0, scale: 1.0 },
            0.5,
            NegativeComponent::CompoundPoisson { jumps: JumpFamily::Pareto { beta: 3.0, scale: 1.0 }, rate: 2.0 },
        )
        .unwrap();
        assert!((cp.neg_tail(1.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn truncated_mean_pareto() {
        let m = pareto_drift(2.0, 1.0, 2.0);
        assert!((m.truncated_mean_pos(3.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(m.truncated_mean_pos(1.0).is_err());
        assert!(m.truncated_mean_pos(1.0 + 1e-12).unwrap() < 1e-11);
    }

    #[test]
    fn mean_and_validity() {
        assert!((pareto_drift(2.0, 1.0, 2.0).mean_x1().unwrap() + 1.0).abs() < 1e-15);
        let bad = ModelSpec::new(JumpFamily::Pareto { beta: 2.0, scale: 1.0 }, 1.0, NegativeComponent::Drift { rate: 0.5 });
        assert!(matches!(bad, Err(Error::Model(_))));
    }

    #[test]
    fn classification() {
        let r = pareto_drift(2.5, 1.0, 2.0).classify().unwrap();
        assert_eq!(r.case, Case::I);
        assert_eq!(r.gamma, 0.0);
        assert_eq!(r.mean_class, MeanClass::FiniteMean);
        assert_eq!(r.beta, Some(2.5));
        let w = ModelSpec::new(
            JumpFamily::Weibull { kappa: 0.5, scale: 1.0 },
            1.0,
            NegativeComponent::StableSubordinator { index: 0.5, scale: 1.0 },
        )
        .unwrap()
        .classify()
        .unwrap();
        assert_eq!((w.case, w.gamma, w.mean_class), (Case::II, 0.5, MeanClass::InfiniteMean));
        let p = ModelSpec {
            positive: JumpFamily::Pareto { beta: 0.4, scale: 1.0 },
            rate: 1.0,
            negative: NegativeComponent::StableSubordinator { index: 0.5, scale: 1.0 },
        };
        assert!(p.classify().is_err());
    }

    #[test]
    fn conditional_sampling_exceeds_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for f in [
            JumpFamily::Pareto { beta: 2.5, scale: 1.0 },
            JumpFamily::Weibull { kappa: 0.5, scale: 1.0 },
            JumpFamily::Lognormal { mu: 0.0, sigma: 1.0 },
        ] {
            for &y in &[0.5, 10.0, 1e3] {
                for _ in 0..100 {
                    assert!(f.sample_above(y, &mut rng) > y);
                }
            }
        }
    }

    #[test]
    fn equilibrium_inverse_roundtrip() {
        for f in [JumpFamily::Pareto { beta: 2.5, scale: 1.0 }, JumpFamily::Weibull { kappa: 0.5, scale: 1.0 }] {
            for &o in &[0.01, 1.0, 50.0, 1e4] {
                let l = f.eq_ln_survival(o);
                let back = f.eq_inverse(l, 0.0, f64::INFINITY);
                assert!(((back - o) / o).abs() < 1e-9, "{f:?} {o} {back}");
            }
        }
    }
}

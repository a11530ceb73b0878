//! Limiting laws of the normalised passage quantities (undershoot V,
//! overshoot U, passage time W) and the constants that go with them.
//!
//! Everything here is deterministic and pure. Laws that need h_1 go through
//! [`crate::stable_law`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::Case;
use crate::quad::{integrate_positive, QuadOptions};
use crate::special::{beta, beta_inc, gamma, gamma_p, ln_gamma};
use crate::stable_law::{density_h, h1, H1Table, StableIndex};

fn check_case_param(case: Case, p: f64, name: &str) -> Result<()> {
    if case == Case::I && !(p > 0.0 && p.is_finite()) {
        return domain(format!("{name} must be positive and finite, got {p}"));
    }
    Ok(())
}

/// Overshoot law of a killed subordinator: α(1+x)^{-1-α} or e^{-x}.
pub fn overshoot_limit(case: Case, alpha: f64, x: f64) -> Result<f64> {
    check_case_param(case, alpha, "alpha")?;
    if x < 0.0 {
        return Ok(0.0);
    }
    Ok(match case {
        Case::I => alpha * (1.0 + x).powf(-1.0 - alpha),
        Case::II => (-x).exp(),
    })
}

pub fn overshoot_limit_cdf(case: Case, alpha: f64, x: f64) -> Result<f64> {
    check_case_param(case, alpha, "alpha")?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(match case {
        Case::I => -(-alpha * x.ln_1p()).exp_m1(),
        Case::II => -(-x).exp_m1(),
    })
}

fn check_beta_gamma0(case: Case, beta: f64) -> Result<()> {
    if case == Case::I && !(beta > 1.0 && beta.is_finite()) {
        return domain(format!("beta must exceed 1, got {beta}"));
    }
    Ok(())
}

/// Local passage-time limit for γ = 0: (β-1)(1+t)^{-β} or e^{-t}.
pub fn passage_local_gamma0(case: Case, beta: f64, t: f64) -> Result<f64> {
    check_beta_gamma0(case, beta)?;
    if t < 0.0 {
        return Ok(0.0);
    }
    Ok(match case {
        Case::I => (beta - 1.0) * (1.0 + t).powf(-beta),
        Case::II => (-t).exp(),
    })
}

pub fn passage_local_gamma0_cdf(case: Case, beta: f64, t: f64) -> Result<f64> {
    check_beta_gamma0(case, beta)?;
    overshoot_limit_cdf(case, beta - 1.0, t)
}

/// Joint density of (V, U) for γ = 0.
pub fn joint_vu_gamma0(case: Case, beta: f64, z: f64, x: f64) -> Result<f64> {
    check_beta_gamma0(case, beta)?;
    if z < 0.0 || x < 0.0 {
        return Ok(0.0);
    }
    Ok(match case {
        Case::I => beta * (beta - 1.0) * (1.0 + z + x).powf(-beta - 1.0),
        Case::II => (-z - x).exp(),
    })
}

/// Parameters of the γ in [0, 1) laws. `beta` is ignored in Case II.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawParams {
    pub case: Case,
    pub beta: f64,
    pub gamma: f64,
}

impl LawParams {
    pub fn new(case: Case, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self { case, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return domain(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.case == Case::I {
            if !self.beta.is_finite() || !(self.beta + self.gamma > 1.0) || !(self.beta > 0.0) {
                return domain(format!("need beta + gamma > 1, got beta {} gamma {}", self.beta, self.gamma));
            }
        }
        Ok(())
    }

    pub fn gamma_bar(&self) -> f64 {
        1.0 - self.gamma
    }

    /// Pareto index of the limiting overshoot: β + γ - 1.
    pub fn alpha(&self) -> f64 {
        self.beta + self.gamma - 1.0
    }

    fn index(&self) -> Result<StableIndex> {
        if self.gamma == 0.0 {
            return domain("this law needs gamma in (0, 1)");
        }
        StableIndex::new(self.gamma_bar())
    }

    fn ln_norm(&self) -> f64 {
        // ln Γ(β) - ln Γ(β+γ-1)
        ln_gamma(self.beta) - ln_gamma(self.alpha())
    }
}

/// f(z): Γ(β)/(Γ(β+γ-1)(1+z)^β) or e^{-z}. Not itself a density.
pub fn undershoot_f(p: &LawParams, z: f64) -> Result<f64> {
    p.validate()?;
    if z < 0.0 {
        return Ok(0.0);
    }
    Ok(match p.case {
        Case::I => (p.ln_norm() - p.beta * z.ln_1p()).exp(),
        Case::II => (-z).exp(),
    })
}

/// Density of (V, U) times the kernel factor, without h: the (z, x) part of
/// the joint law of (V, U, W).
fn vu_factor(p: &LawParams, z: f64, x: f64) -> f64 {
    match p.case {
        Case::I => {
            let ln_c = ln_gamma(p.beta + 1.0) - ln_gamma(p.alpha());
            (ln_c - (p.beta + 1.0) * (1.0 + z + x).ln()).exp()
        }
        Case::II => (-z - x).exp(),
    }
}

/// Joint density of (V, U, W) for γ in (0, 1).
pub fn joint_vuw(p: &LawParams, z: f64, x: f64, t: f64) -> Result<f64> {
    let idx = p.index()?;
    if z <= 0.0 || x < 0.0 || t <= 0.0 {
        return Ok(0.0);
    }
    Ok(vu_factor(p, z, x) * density_h(idx, t, z)?)
}

/// Joint density of (V, U). For γ = 0 this is the γ = 0 law.
pub fn marginal_vu(p: &LawParams, z: f64, x: f64) -> Result<f64> {
    p.validate()?;
    if p.gamma == 0.0 {
        return joint_vu_gamma0(p.case, p.beta, z, x);
    }
    if z <= 0.0 || x < 0.0 {
        return Ok(0.0);
    }
    Ok(vu_factor(p, z, x) * z.powf(-p.gamma) / gamma(p.gamma_bar()))
}

/// Density of V.
pub fn v_marginal_density(p: &LawParams, z: f64) -> Result<f64> {
    p.validate()?;
    if z <= 0.0 {
        return Ok(0.0);
    }
    let g = p.gamma;
    Ok(match p.case {
        Case::I => {
            let ln = p.ln_norm() - ln_gamma(1.0 - g) - g * z.ln() - p.beta * z.ln_1p();
            ln.exp()
        }
        Case::II => ((-g) * z.ln() - z - ln_gamma(1.0 - g)).exp(),
    })
}

/// Distribution function of V.
pub fn v_marginal_cdf(p: &LawParams, z: f64) -> Result<f64> {
    p.validate()?;
    if z <= 0.0 {
        return Ok(0.0);
    }
    let g = p.gamma;
    Ok(match p.case {
        Case::I => beta_inc(1.0 - g, p.alpha(), z / (1.0 + z)),
        Case::II => gamma_p(1.0 - g, z),
    })
}

/// Density of U: the killed-subordinator overshoot law with α = β+γ-1.
pub fn u_marginal_density(p: &LawParams, x: f64) -> Result<f64> {
    p.validate()?;
    overshoot_limit(p.case, p.alpha(), x)
}

pub fn u_marginal_cdf(p: &LawParams, x: f64) -> Result<f64> {
    p.validate()?;
    overshoot_limit_cdf(p.case, p.alpha(), x)
}

fn h1_opts() -> QuadOptions {
    QuadOptions::rel(1e-11).with_abs(1e-300)
}

/// Density of W, by quadrature of h_1 against the kernel
/// (1 + t^{1/γ̄} z)^{-β} (Case I) or e^{-z t^{1/γ̄}} (Case II).
pub fn w_density(p: &LawParams, t: f64) -> Result<f64> {
    let idx = p.index()?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let s = t.powf(1.0 / p.gamma_bar());
    let err = Mutex::new(None);
    let q = match p.case {
        Case::I => {
            let c = p.ln_norm().exp();
            let b = p.beta;
            integrate_positive(|z| guard(&err, h1(idx, z)) * (-b * (s * z).ln_1p()).exp(), h1_opts())?.value * c
        }
        Case::II => integrate_positive(|z| guard(&err, h1(idx, z)) * (-s * z).exp(), h1_opts())?.value,
    };
    take(err)?;
    Ok(q)
}

/// P(W <= t). The t-integral of the kernel is done in closed form, leaving
/// one quadrature against h_1.
pub fn w_cdf(p: &LawParams, t: f64) -> Result<f64> {
    let idx = p.index()?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let gb = p.gamma_bar();
    let s = t.powf(1.0 / gb);
    let err = Mutex::new(None);
    let v = match p.case {
        Case::I => {
            let b2 = p.beta - gb;
            let c = p.ln_norm().exp() * gb * beta(gb, b2);
            let f = |z: f64| {
                let x = s * z;
                guard(&err, h1(idx, z)) * z.powf(-gb) * beta_inc(gb, b2, x / (1.0 + x))
            };
            c * integrate_positive(f, h1_opts())?.value
        }
        Case::II => {
            let c = gb * gamma(gb);
            let f = |z: f64| guard(&err, h1(idx, z)) * z.powf(-gb) * gamma_p(gb, s * z);
            c * integrate_positive(f, h1_opts())?.value
        }
    };
    take(err)?;
    Ok(v.clamp(0.0, 1.0))
}

fn guard(slot: &Mutex<Option<Error>>, r: Result<f64>) -> f64 {
    match r {
        Ok(v) => v,
        Err(e) => {
            let mut g = slot.lock().expect("poisoned");
            if g.is_none() {
                *g = Some(e);
            }
            0.0
        }
    }
}

fn take(slot: Mutex<Option<Error>>) -> Result<()> {
    match slot.into_inner().expect("poisoned") {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Tabulated distribution function of W on a log grid, for bulk evaluation.
/// Quadratic interpolation in ln t inside the grid, exact evaluation outside.
#[derive(Clone, Debug)]
pub struct WCdfTable {
    params: LawParams,
    ln_lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl WCdfTable {
    pub const LO: f64 = 1e-4;
    pub const HI: f64 = 1e4;
    pub const POINTS: usize = 641;

    pub fn new(p: &LawParams) -> Result<Self> {
        p.index()?;
        let ln_lo = Self::LO.ln();
        let step = (Self::HI.ln() - ln_lo) / (Self::POINTS - 1) as f64;
        let values = (0..Self::POINTS)
            .map(|i| w_cdf(p, (ln_lo + step * i as f64).exp()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { params: *p, ln_lo, step, values })
    }

    /// Shared table per parameter set.
    pub fn cached(p: &LawParams) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<[u64; 3], Arc<WCdfTable>>>> = OnceLock::new();
        let key = [p.case as u64, p.beta.to_bits(), p.gamma.to_bits()];
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(Self::new(p)?);
        cache.lock().expect("poisoned").insert(key, Arc::clone(&t));
        Ok(t)
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if !(Self::LO..=Self::HI).contains(&t) {
            return w_cdf(&self.params, t);
        }
        let pos = (t.ln() - self.ln_lo) / self.step;
        let i = (pos.round() as usize).clamp(1, Self::POINTS - 2);
        let d = pos - i as f64;
        let (a, b, c) = (self.values[i - 1], self.values[i], self.values[i + 1]);
        let v = b + 0.5 * d * (c - a) + 0.5 * d * d * (c - 2.0 * b + a);
        Ok(v.clamp(0.0, 1.0))
    }
}

/// θ(z_1..z_k, t) = Π h_{t(s_i - s_{i-1})}(z_i - z_{i-1}) f(z_k), with s_k = 1.
pub fn fdd_theta(p: &LawParams, zs: &[f64], ss: &[f64], t: f64) -> Result<f64> {
    let idx = p.index()?;
    theta_with(p, zs, ss, t, &|s, z| density_h(idx, s, z))
}

/// [`fdd_theta`] with h from a table.
pub fn fdd_theta_tabulated(p: &LawParams, table: &H1Table, zs: &[f64], ss: &[f64], t: f64) -> Result<f64> {
    let idx = p.index()?;
    if idx != table.index() {
        return domain("table index does not match the law");
    }
    theta_with(p, zs, ss, t, &|s, z| table.density_h(s, z))
}

fn theta_with(p: &LawParams, zs: &[f64], ss: &[f64], t: f64, h: &dyn Fn(f64, f64) -> Result<f64>) -> Result<f64> {
    if zs.is_empty() || zs.len() != ss.len() {
        return domain("need matching nonempty z and s lists");
    }
    if !(t > 0.0) {
        return domain(format!("t must be > 0, got {t}"));
    }
    let mut prev = 0.0;
    for &s in ss {
        if !(s > prev && s <= 1.0) {
            return domain("times must increase strictly in (0, 1]");
        }
        prev = s;
    }
    if ss[ss.len() - 1] != 1.0 {
        return domain("last time must be 1");
    }
    let (mut ps, mut pz) = (0.0, 0.0);
    let mut v = 1.0;
    for (&z, &s) in zs.iter().zip(ss) {
        if z <= pz {
            return Ok(0.0);
        }
        v *= h(t * (s - ps), z - pz)?;
        ps = s;
        pz = z;
    }
    Ok(v * undershoot_f(p, pz)?)
}

/// k_γ = 1/(Γ(1+γ)Γ(2-γ)).
pub fn k_gamma(g: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&g) {
        return domain(format!("gamma must lie in [0, 1), got {g}"));
    }
    Ok(1.0 / (gamma(1.0 + g) * gamma(2.0 - g)))
}

/// Readings of c(0, β) in Case I. The source gives 1-β in words, uses β in
/// the follow-on formula, and γ → 0 in the γ > 0 expression gives β-1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C0Reading {
    OneMinusBeta,
    Beta,
    Continuation,
}

/// c(γ, β): Γ(γ+1)Γ(β)/Γ(β+γ-1) in Case I, Γ(γ+1) in Case II. At γ = 0
/// Case I depends on `reading`; Case II gives 1.
pub fn c_gamma_beta(case: Case, g: f64, b: f64, reading: C0Reading) -> Result<f64> {
    let p = LawParams::new(case, b, g)?;
    if g > 0.0 {
        return Ok(match case {
            Case::I => (ln_gamma(g + 1.0) + p.ln_norm()).exp(),
            Case::II => gamma(g + 1.0),
        });
    }
    Ok(match (case, reading) {
        (Case::II, _) => 1.0,
        (Case::I, C0Reading::OneMinusBeta) => 1.0 - b,
        (Case::I, C0Reading::Beta) => b,
        (Case::I, C0Reading::Continuation) => b - 1.0,
    })
}

/// Tail-equivalence constant c_{γ,β} given the descending ladder drift d and
/// E H*_1 (`None` when infinite).
pub fn c_ledger(case: Case, g: f64, b: f64, reading: C0Reading, d: f64, eh_star: Option<f64>) -> Result<f64> {
    let c = c_gamma_beta(case, g, b, reading)?;
    if !(d >= 0.0) {
        return domain(format!("drift must be >= 0, got {d}"));
    }
    let Some(eh) = eh_star else {
        return Ok(if g == 0.0 && case == Case::II { 1.0 } else { c });
    };
    if !(eh > d) {
        return domain(format!("need E H* > d, got {eh} and {d}"));
    }
    let w = match case {
        Case::I => b - 1.0,
        Case::II => 1.0,
    };
    Ok(if g > 0.0 { c + w * d / eh } else { c + w * d / (eh - d) })
}

/// Evaluable laws, for tabulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LimitLaw {
    Overshoot { case: Case, alpha: f64 },
    PassageLocal { case: Case, beta: f64 },
    JointVu { case: Case, beta: f64 },
    UndershootF(LawParams),
    JointVuw(LawParams),
    MarginalVu(LawParams),
    MarginalW(LawParams),
    FddTheta { params: LawParams, times: Vec<f64> },
}

impl LimitLaw {
    /// Map a short label to a law. Labels: local, Y0, Y1, J11, J12, J111,
    /// J112, J113, J114, prop1, f, theta.
    pub fn from_label(label: &str, beta: f64, gamma: f64, times: &[f64]) -> Result<Self> {
        let l = label.trim().trim_start_matches('(').trim_end_matches(')');
        let p = |case| LawParams::new(case, beta, gamma);
        let law = match l.to_ascii_lowercase().as_str() {
            "local" => LimitLaw::PassageLocal { case: Case::I, beta },
            "local2" => LimitLaw::PassageLocal { case: Case::II, beta },
            "y0" => LimitLaw::JointVu { case: Case::I, beta },
            "y1" => LimitLaw::JointVu { case: Case::II, beta },
            "j11" => LimitLaw::JointVuw(p(Case::I)?),
            "j12" => LimitLaw::JointVuw(p(Case::II)?),
            "j111" => LimitLaw::MarginalVu(p(Case::I)?),
            "j112" => LimitLaw::MarginalW(p(Case::I)?),
            "j113" => LimitLaw::MarginalVu(p(Case::II)?),
            "j114" => LimitLaw::MarginalW(p(Case::II)?),
            "prop1" => LimitLaw::Overshoot { case: Case::I, alpha: beta },
            "prop1e" => LimitLaw::Overshoot { case: Case::II, alpha: beta },
            "f" => LimitLaw::UndershootF(p(Case::I)?),
            "f2" => LimitLaw::UndershootF(p(Case::II)?),
            "theta" => LimitLaw::FddTheta { params: p(Case::I)?, times: times.to_vec() },
            "theta2" => LimitLaw::FddTheta { params: p(Case::II)?, times: times.to_vec() },
            _ => return Err(Error::Config(format!("unknown law selector {label:?}"))),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LimitLaw::Overshoot { case, alpha } => check_case_param(*case, *alpha, "alpha"),
            LimitLaw::PassageLocal { case, beta } | LimitLaw::JointVu { case, beta } => check_beta_gamma0(*case, *beta),
            LimitLaw::UndershootF(p) | LimitLaw::MarginalVu(p) => p.validate(),
            LimitLaw::JointVuw(p) | LimitLaw::MarginalW(p) => p.index().map(|_| ()),
            LimitLaw::FddTheta { params, times } => {
                params.index()?;
                if times.is_empty() || times[times.len() - 1] != 1.0 {
                    return domain("theta needs times ending at 1");
                }
                Ok(())
            }
        }
    }

    pub fn columns(&self) -> Vec<String> {
        let names: &[&str] = match self {
            LimitLaw::Overshoot { .. } => &["x"],
            LimitLaw::PassageLocal { .. } | LimitLaw::MarginalW(_) => &["t"],
            LimitLaw::JointVu { .. } | LimitLaw::MarginalVu(_) => &["z", "x"],
            LimitLaw::UndershootF(_) => &["z"],
            LimitLaw::JointVuw(_) => &["z", "x", "t"],
            LimitLaw::FddTheta { times, .. } => {
                let mut v: Vec<String> = (1..=times.len()).map(|i| format!("z{i}")).collect();
                v.push("t".into());
                return v;
            }
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn dims(&self) -> usize {
        self.columns().len()
    }

    /// True for laws that are probability densities.
    pub fn is_density(&self) -> bool {
        !matches!(self, LimitLaw::UndershootF(_) | LimitLaw::FddTheta { .. })
    }

    pub fn evaluate(&self, c: &[f64]) -> Result<f64> {
        if c.len() != self.dims() {
            return Err(Error::Grid(format!("expected {} coordinates, got {}", self.dims(), c.len())));
        }
        match self {
            LimitLaw::Overshoot { case, alpha } => overshoot_limit(*case, *alpha, c[0]),
            LimitLaw::PassageLocal { case, beta } => passage_local_gamma0(*case, *beta, c[0]),
            LimitLaw::JointVu { case, beta } => joint_vu_gamma0(*case, *beta, c[0], c[1]),
            LimitLaw::UndershootF(p) => undershoot_f(p, c[0]),
            LimitLaw::JointVuw(p) => joint_vuw(p, c[0], c[1], c[2]),
            LimitLaw::MarginalVu(p) => marginal_vu(p, c[0], c[1]),
            LimitLaw::MarginalW(p) => w_density(p, c[0]),
            LimitLaw::FddTheta { params, times } => fdd_theta(params, &c[..times.len()], times, c[times.len()]),
        }
    }

    /// Total mass by nested quadrature.
    pub fn total_mass(&self) -> Result<f64> {
        let o = QuadOptions::rel(1e-10).with_abs(1e-300);
        let err = Mutex::new(None);
        let v = match self {
            LimitLaw::Overshoot { .. } | LimitLaw::PassageLocal { .. } | LimitLaw::MarginalW(_) => {
                integrate_positive(|x| guard(&err, self.evaluate(&[x])), o)?.value
            }
            LimitLaw::JointVu { .. } | LimitLaw::MarginalVu(_) => {
                let inner = |z: f64| {
                    let r = integrate_positive(|x| guard(&err, self.evaluate(&[z, x])), o).map(|q| q.value);
                    guard(&err, r)
                };
                integrate_positive(inner, o)?.value
            }
            LimitLaw::JointVuw(p) => {
                let idx = p.index()?;
                let inner = |z: f64| {
                    let rx = integrate_positive(|x| vu_factor(p, z, x), o).map(|q| q.value);
                    let rt = integrate_positive(|t| guard(&err, density_h(idx, t, z)), o).map(|q| q.value);
                    guard(&err, rx) * guard(&err, rt)
                };
                integrate_positive(inner, QuadOptions::rel(1e-9).with_abs(1e-300))?.value
            }
            LimitLaw::UndershootF(_) | LimitLaw::FddTheta { .. } => {
                return domain("law is not a probability density");
            }
        };
        take(err)?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn overshoot_examples() {
        assert!((overshoot_limit_cdf(Case::I, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(overshoot_limit(Case::II, 0.0, 0.0).unwrap(), 1.0);
        let m = LimitLaw::Overshoot { case: Case::I, alpha: 1.5 }.total_mass().unwrap();
        assert!((m - 1.0).abs() < 1e-10);
    }

    #[test]
    fn passage_local_examples() {
        assert!((passage_local_gamma0(Case::I, 2.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(passage_local_gamma0(Case::II, 0.0, 0.0).unwrap(), 1.0);
        let m = LimitLaw::PassageLocal { case: Case::I, beta: 2.5 }.total_mass().unwrap();
        assert!((m - 1.0).abs() < 1e-10);
    }

    #[test]
    fn joint_vu_examples() {
        assert!((joint_vu_gamma0(Case::I, 2.0, 1.0, 1.0).unwrap() - 2.0 / 27.0).abs() < 1e-15);
        assert_eq!(joint_vu_gamma0(Case::II, 0.0, 0.0, 0.0).unwrap(), 1.0);
        // antiderivative in z: β(1+z+x)^{-β} evaluated from 0 → (β-1)... scaled
        let q = integrate_positive(|z| joint_vu_gamma0(Case::I, 2.0, z, 1.0).unwrap(), QuadOptions::rel(1e-12)).unwrap();
        assert!((q.value - 0.25).abs() < 1e-10);
    }

    #[test]
    fn undershoot_f_examples() {
        let p = LawParams::new(Case::I, 2.0, 0.5).unwrap();
        assert!((undershoot_f(&p, 0.0).unwrap() - 2.0 / PI.sqrt()).abs() < 1e-13);
        let p2 = LawParams::new(Case::II, 2.0, 0.5).unwrap();
        assert!((undershoot_f(&p2, 2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        let q = integrate_positive(
            |z| undershoot_f(&p, z).unwrap() * z.powf(-0.5) / gamma(0.5),
            QuadOptions::rel(1e-12),
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn joint_vuw_examples() {
        let p = LawParams::new(Case::II, 1.0, 0.5).unwrap();
        let h = 0.5 / PI.sqrt() * (-0.25f64).exp();
        let v = joint_vuw(&p, 1.0, 0.0, 1.0).unwrap();
        assert!((v - (-1.0f64).exp() * h).abs() < 1e-13);
        assert!((v - 0.080822).abs() < 1e-6);
        let pi = LawParams::new(Case::I, 2.0, 0.5).unwrap();
        assert!(joint_vuw(&pi, 1.0, 1e8, 1.0).unwrap() < 1e-20);
    }

    #[test]
    fn marginal_examples() {
        let p = LawParams::new(Case::II, 1.0, 0.5).unwrap();
        let v = marginal_vu(&p, 1.0, 0.0).unwrap();
        assert!((v - (-1.0f64).exp() / PI.sqrt()).abs() < 1e-15);
        assert!((v - 0.207554).abs() < 1e-6);
    }

    #[test]
    fn constants() {
        assert!((k_gamma(0.5).unwrap() - 4.0 / PI).abs() < 1e-12);
        assert!((c_gamma_beta(Case::I, 0.5, 2.0, C0Reading::Beta).unwrap() - 1.0).abs() < 1e-13);
        assert!((c_gamma_beta(Case::II, 0.5, 2.0, C0Reading::Beta).unwrap() - PI.sqrt() / 2.0).abs() < 1e-13);
        assert_eq!(c_gamma_beta(Case::I, 0.0, 2.5, C0Reading::OneMinusBeta).unwrap(), -1.5);
        assert_eq!(c_gamma_beta(Case::I, 0.0, 2.5, C0Reading::Continuation).unwrap(), 1.5);
        // finite-mean ledger: (β E - d)/(E - d)
        let c = c_ledger(Case::I, 0.0, 2.5, C0Reading::Beta, 0.5, Some(2.0)).unwrap();
        assert!((c - (2.5 * 2.0 - 0.5) / 1.5).abs() < 1e-14);
        let c = c_ledger(Case::II, 0.0, 2.5, C0Reading::Beta, 0.5, Some(2.0)).unwrap();
        assert!((c - 2.0 / 1.5).abs() < 1e-14);
        assert_eq!(c_ledger(Case::II, 0.0, 2.5, C0Reading::Beta, 0.5, None).unwrap(), 1.0);
    }

    #[test]
    fn theta_examples() {
        let p = LawParams::new(Case::II, 1.0, 0.5).unwrap();
        let idx = StableIndex::new(0.5).unwrap();
        let one = fdd_theta(&p, &[0.7], &[1.0], 1.3).unwrap();
        assert_eq!(one, density_h(idx, 1.3, 0.7).unwrap() * (-0.7f64).exp());
        assert_eq!(fdd_theta(&p, &[1.0, 0.5], &[0.5, 1.0], 1.0).unwrap(), 0.0);
        let levy = |t: f64, z: f64| t / (2.0 * PI.sqrt() * z.powf(1.5)) * (-t * t / (4.0 * z)).exp();
        let v = fdd_theta(&p, &[0.4, 1.0], &[0.5, 1.0], 1.0).unwrap();
        let oracle = levy(0.5, 0.4) * levy(0.5, 0.6) * (-1.0f64).exp();
        assert!(((v - oracle) / oracle).abs() < 1e-12);
    }

    #[test]
    fn selector_labels() {
        let l = LimitLaw::from_label("(Y0)", 2.0, 0.0, &[]).unwrap();
        assert_eq!(l.columns(), vec!["z", "x"]);
        assert!(matches!(LimitLaw::from_label("nope", 2.0, 0.0, &[]), Err(Error::Config(_))));
    }

    // Laplace-transform form of the W law: Γ(β+γ-1)^{-1} ∫ s^{β-1} e^{-s} k(s) ds
    fn w_oracle(p: &LawParams, t: f64, cdf: bool) -> f64 {
        let gb = p.gamma_bar();
        let b = p.beta;
        let f = |s: f64| {
            let k = if cdf { -(-t * s.powf(gb)).exp_m1() / s.powf(gb) } else { (-t * s.powf(gb)).exp() };
            (b - 1.0) * s.ln() - s + k.ln()
        };
        let q = integrate_positive(|s| f(s).exp(), QuadOptions::rel(1e-12)).unwrap();
        q.value / gamma(p.alpha())
    }

    #[test]
    fn w_law_matches_laplace_form() {
        let p = LawParams::new(Case::I, 2.5, 0.5).unwrap();
        for &t in &[0.05, 0.3, 1.0, 4.0, 30.0] {
            let d = w_density(&p, t).unwrap();
            let c = w_cdf(&p, t).unwrap();
            assert!((d - w_oracle(&p, t, false)).abs() < 1e-9 * d.max(1e-3), "density {t}");
            assert!((c - w_oracle(&p, t, true)).abs() < 1e-9, "cdf {t}");
        }
        let p2 = LawParams::new(Case::II, 1.0, 0.3).unwrap();
        for &t in &[0.05, 1.0, 6.0] {
            assert!((w_density(&p2, t).unwrap() - (-t).exp()).abs() < 1e-9);
            assert!((w_cdf(&p2, t).unwrap() + (-t).exp_m1()).abs() < 1e-9);
        }
    }

    #[test]
    fn w_table_tracks_exact() {
        let p = LawParams::new(Case::I, 2.5, 0.5).unwrap();
        let tab = WCdfTable::cached(&p).unwrap();
        for &t in &[0.011, 0.27, 1.3, 7.7, 123.0, 2e4] {
            assert!((tab.cdf(t).unwrap() - w_cdf(&p, t).unwrap()).abs() < 1e-6, "{t}");
        }
    }
}

//! Forced-jump conditional samplers.
//!
//! Passage happens at a positive jump epoch t with pre-jump position w, and
//! the passage measure is λ₊ dt P(X_t ∈ dw, sup_{s≤t} X_s ≤ u) F(u - w, ∞).
//! These samplers propose (t, path on [0, t]) from a tractable law close to
//! that measure and correct by rejection with a bounded weight. Weights above
//! the bound are counted as overflows and clipped.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::error::{Error, Result};
use crate::model::{Case, JumpFamily, ModelSpec, NegativeComponent};
use crate::norming::NormingBundle;
use crate::special::{beta as beta_fn, gamma, ln_gamma};
use crate::stable_law::{stable_increment, StableIndex};

use super::direct::stable_at;
use super::noise::RngNoise;
use super::FirstPassageSample;

/// Smallest rejection bound on the normalised weight.
pub(crate) const MIN_WEIGHT_BOUND: f64 = 1.5;
/// Pilot proposals used to set the bound.
pub(crate) const PILOT: usize = 4000;
/// Bound = max(MIN_WEIGHT_BOUND, PILOT_MARGIN · largest pilot weight).
const PILOT_MARGIN: f64 = 1.25;
/// Rate factor of the Gamma proposal for the undershoot in Case II.
const GAMMA_TILT: f64 = 0.9;

/// Result of one proposal.
pub(crate) enum Proposal {
    Accepted(FirstPassageSample),
    Rejected,
}

/// Running weight statistics of a sampler.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct WeightTally {
    pub proposals: u64,
    pub weight_sum: f64,
    pub weight_sq_sum: f64,
    pub overflows: u64,
    pub overflow_excess: f64,
    pub max_weight: f64,
}

impl WeightTally {
    fn record(&mut self, w: f64, bound: f64) {
        self.proposals += 1;
        self.weight_sum += w;
        self.weight_sq_sum += w * w;
        self.max_weight = self.max_weight.max(w);
        if w > bound {
            self.overflows += 1;
            self.overflow_excess += w - bound;
        }
    }

    pub fn merge(&mut self, o: &WeightTally) {
        self.proposals += o.proposals;
        self.weight_sum += o.weight_sum;
        self.weight_sq_sum += o.weight_sq_sum;
        self.overflows += o.overflows;
        self.overflow_excess += o.overflow_excess;
        self.max_weight = self.max_weight.max(o.max_weight);
    }
}

#[derive(Clone, Copy, Debug)]
enum ZProposal {
    /// z = scale · G_a / G_b.
    BetaPrime { a: f64, b: f64, scale: f64 },
    /// z ~ Gamma(shape, rate).
    Gamma { shape: f64, rate: f64 },
}

/// Stable negative component.
#[derive(Clone, Debug)]
pub(crate) struct StableForced {
    model: ModelSpec,
    idx: StableIndex,
    kappa: f64,
    u: f64,
    proposal: ZProposal,
    ln_sf_u: f64,
    /// ln of the weight scale: P(pass) = e^{ln_scale} E[w̃].
    pub ln_scale: f64,
    pub bound: f64,
}

impl StableForced {
    pub fn new(model: &ModelSpec, norming: &NormingBundle, u: f64) -> Result<Self> {
        let NegativeComponent::StableSubordinator { index, scale } = model.negative else {
            return Err(Error::Domain("forced stable sampler needs a stable negative component".into()));
        };
        let idx = StableIndex::new(index)?;
        let gb = index;
        let (proposal, ln_norm) = match (norming.regime.case, model.positive) {
            (Case::I, JumpFamily::Pareto { beta, scale: s }) => {
                let sc = s + u;
                (ZProposal::BetaPrime { a: gb, b: beta - gb, scale: sc }, gb * sc.ln() + beta_fn(gb, beta - gb).ln())
            }
            _ => {
                let a = norming.a(u)?;
                let rate = GAMMA_TILT / a;
                (ZProposal::Gamma { shape: gb, rate }, ln_gamma(gb) - gb * rate.ln())
            }
        };
        let ln_sf_u = model.positive.ln_survival(u);
        let ln_scale = model.rate.ln() - scale.ln() - gamma(gb).ln() + ln_norm + ln_sf_u;
        Ok(Self { model: *model, idx, kappa: scale, u, proposal, ln_sf_u, ln_scale, bound: MIN_WEIGHT_BOUND })
    }

    fn ln_q_tilde(&self, z: f64) -> f64 {
        match (self.proposal, self.model.positive) {
            (ZProposal::BetaPrime { scale, .. }, JumpFamily::Pareto { beta, .. }) => -beta * (z / scale).ln_1p(),
            (ZProposal::Gamma { rate, .. }, _) => -rate * z,
            _ => unreachable!("proposal matches family"),
        }
    }

    fn draw_z<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.proposal {
            ZProposal::BetaPrime { a, b, scale } => {
                let ga: f64 = Gamma::new(a, 1.0).expect("shape").sample(rng);
                let gb: f64 = Gamma::new(b, 1.0).expect("shape").sample(rng);
                scale * ga / gb
            }
            ZProposal::Gamma { shape, rate } => {
                let g: f64 = Gamma::new(shape, 1.0).expect("shape").sample(rng);
                g / rate
            }
        }
    }

    pub fn propose<R: Rng>(&self, rng: &mut R, fractions: &[f64], tally: &mut WeightTally) -> Result<Proposal> {
        let gb = self.idx.gbar();
        let z = self.draw_z(rng);
        if !(z > 0.0 && z.is_finite()) {
            tally.record(0.0, self.bound);
            return Ok(Proposal::Rejected);
        }
        // endpoint law tilted by S^{-γ̄}: mix exponential tilts e^{-λS}, λ^{γ̄} ~ Exp(1)
        let e: f64 = Exp1.sample(rng);
        let lam = e.powf(1.0 / gb);
        let pieces = (e.ceil() as usize).max(4);
        let mut grid: Vec<f64> = (1..=pieces).map(|i| i as f64 / pieces as f64).collect();
        grid.extend(fractions.iter().copied().filter(|&s| s > 0.0 && s < 1.0));
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let mut dt = Vec::with_capacity(grid.len() + 1);
        dt.push((0.0, 0.0));
        let (mut prev, mut cum) = (0.0, 0.0);
        for &s in &grid {
            let delta = s - prev;
            let inc = loop {
                let x = stable_increment(self.idx, delta, rng);
                let ua: f64 = rng.random();
                if ua < (-lam * x).exp() {
                    break x;
                }
            };
            cum += inc;
            dt.push((s, cum));
            prev = s;
        }
        let s1 = cum;
        if !(s1 > 0.0) {
            tally.record(0.0, self.bound);
            return Ok(Proposal::Rejected);
        }
        let t = (z / s1).powf(gb) / self.kappa;
        let dscale = z / s1;
        // D at real time s t is dscale * D̃(s)
        let mut known: Vec<(f64, f64)> = dt.iter().map(|&(s, d)| (s * t, dscale * d)).collect();
        let last = known.len() - 1;
        known[last].0 = t;
        // positive compound Poisson on [0, t]
        let mut jumps = Vec::new();
        let mut tt = 0.0;
        let mut cp = 0.0;
        loop {
            let g: f64 = Exp1.sample(rng);
            tt += g / self.model.rate;
            if tt >= t {
                break;
            }
            cp += self.model.positive.sample(rng);
            jumps.push((tt, cp));
        }
        let slack = self.u + z - cp;
        if !(slack > 0.0) {
            tally.record(0.0, self.bound);
            return Ok(Proposal::Rejected);
        }
        let mut noise = RngNoise(&mut *rng);
        if cp > self.u {
            for &(r, c) in &jumps {
                if c <= self.u {
                    continue;
                }
                let d = stable_at(self.idx, self.kappa, &mut known, r, &mut noise)?;
                if c - d > self.u {
                    tally.record(0.0, self.bound);
                    return Ok(Proposal::Rejected);
                }
            }
        }
        let w = (self.model.positive.ln_survival(slack) - self.ln_sf_u - self.ln_q_tilde(z)).exp();
        tally.record(w, self.bound);
        let ua: f64 = noise.0.random();
        if ua >= (w / self.bound).min(1.0) {
            return Ok(Proposal::Rejected);
        }
        let zu = z - cp;
        let j = self.model.positive.sample_above(self.u + zu, &mut *noise.0);
        let mut snaps = Vec::with_capacity(fractions.len());
        for &s in fractions {
            if s >= 1.0 {
                snaps.push((s, zu));
                continue;
            }
            let ts = s * t;
            let d = stable_at(self.idx, self.kappa, &mut known, ts, &mut noise)?;
            let c = jumps.iter().take_while(|p| p.0 <= ts).last().map_or(0.0, |p| p.1);
            snaps.push((s, d - c));
        }
        Ok(Proposal::Accepted(FirstPassageSample {
            replicate: 0,
            u: self.u,
            tau: t,
            z: zu,
            o: j - self.u - zu,
            snapshots: snaps,
            attempts: 1,
        }))
    }
}

/// Finite-mean negative component: t from the fluid approximation X_t ≈ -m t.
#[derive(Clone, Debug)]
pub(crate) struct FluidForced {
    model: ModelSpec,
    u: f64,
    m: f64,
    pub ln_scale: f64,
    pub bound: f64,
}

impl FluidForced {
    pub fn new(model: &ModelSpec, u: f64) -> Result<Self> {
        let m = -model.mean_x1()?;
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Domain("fluid proposal needs a finite negative mean".into()));
        }
        let ej = model
            .positive
            .mean()
            .ok_or_else(|| Error::Domain("fluid proposal needs a finite positive mean".into()))?;
        let ln_scale = model.rate.ln() + ej.ln() + model.positive.eq_ln_survival(u) - m.ln();
        Ok(Self { model: *model, u, m, ln_scale, bound: MIN_WEIGHT_BOUND })
    }

    pub fn propose<R: Rng>(&self, rng: &mut R, fractions: &[f64], tally: &mut WeightTally) -> Result<Proposal> {
        let o = self.model.positive.sample_equilibrium_between(self.u, f64::INFINITY, rng);
        let t = (o - self.u) / self.m;
        let lam_p = self.model.rate;
        let (lam_n, neg_law, drift) = match self.model.negative {
            NegativeComponent::CompoundPoisson { jumps, rate } => (rate, Some(jumps), 0.0),
            NegativeComponent::Drift { rate } => (0.0, None, rate),
            NegativeComponent::StableSubordinator { .. } => {
                return Err(Error::Domain("fluid proposal does not apply to a stable component".into()))
            }
        };
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let (mut tt, mut cp, mut cn) = (0.0f64, 0.0f64, 0.0f64);
        loop {
            let g: f64 = Exp1.sample(rng);
            tt += g / (lam_p + lam_n);
            if tt >= t {
                break;
            }
            if lam_n == 0.0 || rng.random::<f64>() < lam_p / (lam_p + lam_n) {
                cp += self.model.positive.sample(rng);
                pos.push((tt, cp));
                if cp - cn - drift * tt > self.u {
                    tally.record(0.0, self.bound);
                    return Ok(Proposal::Rejected);
                }
            } else {
                cn += neg_law.as_ref().expect("law").sample(rng);
                neg.push((tt, cn));
            }
        }
        let xt = cp - cn - drift * t;
        let w = (self.model.positive.ln_survival(self.u - xt) - self.model.positive.ln_survival(o)).exp();
        tally.record(w, self.bound);
        if rng.random::<f64>() >= (w / self.bound).min(1.0) {
            return Ok(Proposal::Rejected);
        }
        let j = self.model.positive.sample_above(self.u - xt, rng);
        let at = |v: &Vec<(f64, f64)>, ts: f64| v.iter().take_while(|p| p.0 <= ts).last().map_or(0.0, |p| p.1);
        let snaps = fractions
            .iter()
            .map(|&s| {
                if s >= 1.0 {
                    (s, -xt)
                } else {
                    let ts = s * t;
                    (s, at(&neg, ts) + drift * ts - at(&pos, ts))
                }
            })
            .collect();
        Ok(Proposal::Accepted(FirstPassageSample {
            replicate: 0,
            u: self.u,
            tau: t,
            z: -xt,
            o: xt + j - self.u,
            snapshots: snaps,
            attempts: 1,
        }))
    }
}

/// Bound from the largest weight among `PILOT` proposals.
pub(crate) fn pilot_bound<F: FnMut(&mut WeightTally) -> Result<Proposal>>(mut f: F) -> Result<f64> {
    let mut t = WeightTally::default();
    for _ in 0..PILOT {
        f(&mut t)?;
    }
    Ok((PILOT_MARGIN * t.max_weight).max(MIN_WEIGHT_BOUND))
}

//! Exact conditional sampling through the record (ladder) chain.
//!
//! For a compound Poisson process with linear decrease, successive new
//! maxima form a killed renewal chain: with probability ρ there is another
//! record, and its height has the equilibrium law of the jump size. A killed
//! compound Poisson subordinator has the same structure with the jump law
//! itself. Passage of u is passage of the chain.
//!
//! The chain is conditioned on passage with a step-function superharmonic
//! majorant ĥ of the passage probability. Proposals use the ĥ-transform and
//! paths are accepted with probability Π N(x_i)/ĥ(x_i) ≤ 1, which gives the
//! exact conditional law.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::model::{JumpFamily, ModelSpec, NegativeComponent};

use super::FirstPassageSample;

/// Law of one chain step.
#[derive(Clone, Copy, Debug)]
pub(crate) enum StepLaw {
    /// Density S(x)/E J.
    Equilibrium(JumpFamily),
    /// The jump law.
    Jump(JumpFamily),
}

impl StepLaw {
    pub fn ln_sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            StepLaw::Equilibrium(f) => f.eq_ln_survival(x),
            StepLaw::Jump(f) => f.ln_survival(x),
        }
    }

    /// Draw restricted to (lo, hi]; `hi` may be +inf.
    pub fn sample_between<R: Rng + ?Sized>(&self, lo: f64, hi: f64, rng: &mut R) -> f64 {
        match self {
            StepLaw::Equilibrium(f) => f.sample_equilibrium_between(lo, hi, rng),
            StepLaw::Jump(f) => {
                let llo = self.ln_sf(lo);
                let lhi = if hi.is_finite() { self.ln_sf(hi) } else { f64::NEG_INFINITY };
                let r = (lhi - llo).exp();
                let u: f64 = 1.0 - rng.random::<f64>();
                let target = llo + (r + u * (1.0 - r)).ln();
                invert_ln_survival(f, target, lo, hi)
            }
        }
    }
}

fn invert_ln_survival(f: &JumpFamily, target: f64, lo: f64, hi: f64) -> f64 {
    let x = match *f {
        JumpFamily::Pareto { beta, scale } => scale * (-target / beta).exp_m1(),
        JumpFamily::Weibull { kappa, scale } => scale * (-target).powf(1.0 / kappa),
        JumpFamily::Lognormal { .. } => {
            let (mut a, mut b) = (lo, if hi.is_finite() { hi } else { lo.max(1.0) * 2.0 });
            while !hi.is_finite() && f.ln_survival(b) > target {
                a = b;
                b *= 2.0;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if f.ln_survival(m) > target {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        }
    };
    x.clamp(lo, hi)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// ln(e^a - e^b) for a >= b.
fn ln_diff(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + (-(b - a).exp_m1()).ln()
}

/// Cell boundaries, ln ĥ per cell and the normaliser N(u).
#[derive(Clone, Debug)]
pub(crate) struct LadderChain {
    pub law: StepLaw,
    pub ln_rho: f64,
    bounds: Vec<f64>,
    ln_h: Vec<f64>,
    pub u: f64,
    pub ln_n_u: f64,
}

/// One accepted chain path: record increments, the last one crossing u.
#[derive(Clone, Debug)]
pub(crate) struct ChainPath {
    pub steps: Vec<f64>,
    pub attempts: u64,
}

pub(crate) const CELL_LOG_DROP: f64 = 0.1;

impl LadderChain {
    pub fn new(law: StepLaw, rho: f64, u: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("record probability must lie in (0, 1), got {rho}")));
        }
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::Domain(format!("level must be > 0, got {u}")));
        }
        let ln_rho = rho.ln();
        let mut ch = Self { law, ln_rho, bounds: vec![0.0], ln_h: vec![ln_rho], u, ln_n_u: 0.0 };
        let min_w = u * 1e-9;
        let max_w = u / 16.0;
        let mut w = (u * 1e-4).min(max_w);
        let mut scratch = Vec::new();
        while *ch.bounds.last().expect("nonempty") < u {
            let j = ch.ln_h.len() - 1;
            let xj = ch.bounds[j];
            let lh = ch.ln_h[j];
            let (y, ly) = loop {
                let y = xj + w;
                let ly = ch.ln_n(y, j, &mut scratch);
                if lh - ly <= CELL_LOG_DROP || w <= min_w {
                    break (y, ly);
                }
                w *= 0.5;
            };
            ch.bounds.push(y);
            ch.ln_h.push(ly.min(lh));
            w = (w * 1.5).min(max_w);
        }
        let ju = ch.cell_of(u);
        ch.ln_n_u = ch.ln_n(u, ju, &mut scratch);
        Ok(ch)
    }

    pub fn cells(&self) -> usize {
        self.ln_h.len()
    }

    /// P̂(pass) scale: N(u).
    pub fn n_u(&self) -> f64 {
        self.ln_n_u.exp()
    }

    fn cell_of(&self, x: f64) -> usize {
        (self.bounds.partition_point(|&b| b <= x).max(1) - 1).min(self.ln_h.len() - 1)
    }

    fn upper(&self, k: usize, x: f64) -> f64 {
        if k + 1 < self.bounds.len() {
            self.bounds[k + 1].min(x)
        } else {
            x
        }
    }

    /// Log-weights [cross, cell 0, ..., cell j] at state x in cell j; the
    /// returned value is ln N(x).
    fn ln_weights(&self, x: f64, j: usize, out: &mut Vec<f64>) -> f64 {
        out.clear();
        out.push(self.law.ln_sf(x));
        for k in 0..=j {
            let lo = x - self.upper(k, x);
            let hi = x - self.bounds[k];
            let lm = ln_diff(self.law.ln_sf(lo), self.law.ln_sf(hi));
            out.push(self.ln_h[k] + lm);
        }
        self.ln_rho + log_sum_exp(out)
    }

    fn ln_n(&self, x: f64, j: usize, out: &mut Vec<f64>) -> f64 {
        self.ln_weights(x, j, out)
    }

    /// One accepted path, or `None` if `max_attempts` proposals were rejected.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_attempts: u64) -> Option<ChainPath> {
        let mut w = Vec::with_capacity(self.cells() + 1);
        let mut attempts = 0u64;
        'attempt: while attempts < max_attempts {
            attempts += 1;
            let mut x = self.u;
            let mut steps = Vec::new();
            let mut first = true;
            loop {
                let j = self.cell_of(x);
                let ln_n = self.ln_weights(x, j, &mut w);
                if !first {
                    let ln_r = (ln_n - self.ln_h[j]).min(0.0);
                    let e: f64 = Exp1.sample(rng);
                    if -e > ln_r {
                        continue 'attempt;
                    }
                }
                first = false;
                let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = w.iter().map(|v| (v - m).exp()).sum();
                let mut pick = rng.random::<f64>() * total;
                let mut choice = w.len() - 1;
                for (i, v) in w.iter().enumerate() {
                    let p = (v - m).exp();
                    if pick < p {
                        choice = i;
                        break;
                    }
                    pick -= p;
                }
                if choice == 0 {
                    steps.push(self.law.sample_between(x, f64::INFINITY, rng));
                    return Some(ChainPath { steps, attempts });
                }
                let k = choice - 1;
                let (lo, hi) = (x - self.upper(k, x), x - self.bounds[k]);
                let o = self.law.sample_between(lo.max(0.0), hi, rng);
                steps.push(o);
                x = (x - o).clamp(self.bounds[k], self.upper(k, x).max(self.bounds[k]));
                if x <= 0.0 {
                    // numerically at the origin: ĥ_0 = ρ is exact there
                    x = 0.0;
                }
            }
        }
        None
    }
}

/// Record chain of a compound Poisson process with drift, plus the excursion
/// below each record.
#[derive(Clone, Debug)]
pub(crate) struct DriftChainSampler {
    chain: LadderChain,
    positive: JumpFamily,
    rate: f64,
    drift: f64,
    u: f64,
}

/// Excursion from one record to the jump that makes the next one, stored in
/// reversed time as the dual path c s - CP(s) up to its first passage of y.
struct Excursion {
    y: f64,
    duration: f64,
    /// (time, cumulative jump sum) of the dual path.
    jumps: Vec<(f64, f64)>,
}

impl DriftChainSampler {
    pub fn new(model: &ModelSpec, u: f64) -> Result<Self> {
        let NegativeComponent::Drift { rate: drift } = model.negative else {
            return Err(Error::Domain("record chain needs a drift negative component".into()));
        };
        let ej = model
            .positive
            .mean()
            .ok_or_else(|| Error::Domain("record chain needs a finite positive mean".into()))?;
        let rho = model.rate * ej / drift;
        let chain = LadderChain::new(StepLaw::Equilibrium(model.positive), rho, u)?;
        Ok(Self { chain, positive: model.positive, rate: model.rate, drift, u })
    }

    pub fn n_u(&self) -> f64 {
        self.chain.n_u()
    }

    fn excursion<R: Rng + ?Sized>(&self, o: f64, rng: &mut R) -> Excursion {
        let j = self.positive.sample_above(o, rng);
        let y = (j - o).max(0.0);
        let mut jumps = Vec::new();
        let (mut t, mut pos, mut cum) = (0.0f64, 0.0f64, 0.0f64);
        loop {
            let g: f64 = Exp1.sample(rng);
            let g = g / self.rate;
            if pos + self.drift * g >= y {
                t += (y - pos) / self.drift;
                break;
            }
            t += g;
            let jump = self.positive.sample(rng);
            pos += self.drift * g - jump;
            cum += jump;
            jumps.push((t, cum));
        }
        Excursion { y, duration: t, jumps }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, fractions: &[f64], max_attempts: u64) -> Option<FirstPassageSample> {
        let path = self.chain.sample(rng, max_attempts)?;
        let ex: Vec<Excursion> = path.steps.iter().map(|&o| self.excursion(o, rng)).collect();
        let n = ex.len();
        let m_before: f64 = path.steps[..n - 1].iter().sum();
        let tau: f64 = ex.iter().map(|e| e.duration).sum();
        let z = ex[n - 1].y - m_before;
        let o = m_before + path.steps[n - 1] - self.u;
        let mut snaps = Vec::with_capacity(fractions.len());
        for &s in fractions {
            if s >= 1.0 {
                snaps.push((s, z));
                continue;
            }
            let ts = s * tau;
            let (mut start, mut level) = (0.0, 0.0);
            let mut x = f64::NAN;
            for (i, e) in ex.iter().enumerate() {
                if ts < start + e.duration || i == n - 1 {
                    // X(start + v) = level - y + c (T - v) - CP(T - v)
                    let w = (e.duration - (ts - start)).max(0.0);
                    let cp = e.jumps.iter().take_while(|p| p.0 <= w).last().map_or(0.0, |p| p.1);
                    x = level - e.y + self.drift * w - cp;
                    break;
                }
                start += e.duration;
                level += path.steps[i];
            }
            snaps.push((s, -x));
        }
        Some(FirstPassageSample { replicate: 0, u: self.u, tau, z, o, snapshots: snaps, attempts: path.attempts })
    }
}

/// Overshoot of a compound Poisson subordinator killed at rate q.
#[derive(Clone, Debug)]
pub struct KilledSubordinator {
    pub jumps: JumpFamily,
    pub rate: f64,
    pub kill: f64,
}

/// One conditional passage of a killed subordinator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KilledPassage {
    /// u minus the level before the crossing jump.
    pub gap: f64,
    pub overshoot: f64,
    pub attempts: u64,
    /// Rejected replicates killed before their first jump.
    pub early_kills: u64,
}

impl KilledSubordinator {
    pub fn validate(&self) -> Result<()> {
        self.jumps.validate()?;
        if !(self.rate > 0.0 && self.kill > 0.0 && self.rate.is_finite() && self.kill.is_finite()) {
            return Err(Error::Domain("killed subordinator needs positive jump and killing rates".into()));
        }
        Ok(())
    }

    pub fn record_probability(&self) -> f64 {
        self.rate / (self.rate + self.kill)
    }

    /// Plain rejection: run the killed process; killed paths are counted.
    pub fn naive<R: Rng + ?Sized>(&self, u: f64, rng: &mut R, max_attempts: u64) -> Option<KilledPassage> {
        let p = self.record_probability();
        let mut early = 0u64;
        for a in 1..=max_attempts {
            let mut level = 0.0;
            let mut jumps = 0u64;
            while rng.random::<f64>() < p {
                let j = self.jumps.sample(rng);
                jumps += 1;
                if level + j > u {
                    return Some(KilledPassage { gap: u - level, overshoot: level + j - u, attempts: a, early_kills: early });
                }
                level += j;
            }
            if jumps == 0 {
                early += 1;
            }
        }
        None
    }

    pub(crate) fn chain(&self, u: f64) -> Result<LadderChain> {
        self.validate()?;
        LadderChain::new(StepLaw::Jump(self.jumps), self.record_probability(), u)
    }
}

pub(crate) fn killed_from_chain<R: Rng + ?Sized>(ch: &LadderChain, rng: &mut R, max_attempts: u64) -> Option<KilledPassage> {
    let p = ch.sample(rng, max_attempts)?;
    let n = p.steps.len();
    let before: f64 = p.steps[..n - 1].iter().sum();
    Some(KilledPassage { gap: ch.u - before, overshoot: before + p.steps[n - 1] - ch.u, attempts: p.attempts, early_kills: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::noise::stream_rng;

    #[test]
    fn majorant_is_nonincreasing_and_bounded() {
        let ch = LadderChain::new(StepLaw::Equilibrium(JumpFamily::Pareto { beta: 2.5, scale: 1.0 }), 0.5, 200.0).unwrap();
        assert!(ch.ln_h.windows(2).all(|p| p[1] <= p[0]));
        assert!(ch.ln_h[0] <= 0.0);
        // passage probability for exponential steps is known exactly: ρ e^{-(1-ρ)u}
        let e = LadderChain::new(StepLaw::Jump(JumpFamily::Weibull { kappa: 1.0, scale: 1.0 }), 0.5, 10.0).unwrap();
        let exact = 0.5 * (-5.0f64).exp();
        assert!(e.n_u() >= exact * 0.999);
        assert!(e.n_u() <= exact * 1.5);
    }

    #[test]
    fn exponential_steps_recover_passage_probability() {
        // ψ(u) = ρ e^{-(1-ρ)u} for Exp(1) steps; N(u) times acceptance estimates it
        let ch = LadderChain::new(StepLaw::Jump(JumpFamily::Weibull { kappa: 1.0, scale: 1.0 }), 0.5, 10.0).unwrap();
        let mut rng = stream_rng(11, 0);
        let n = 20_000;
        let mut attempts = 0u64;
        let mut over = Vec::new();
        for _ in 0..n {
            let p = ch.sample(&mut rng, 1_000_000).unwrap();
            attempts += p.attempts;
            let sum: f64 = p.steps.iter().sum();
            over.push(sum - 10.0);
        }
        let acc = n as f64 / attempts as f64;
        let est = ch.n_u() * acc;
        let exact = 0.5 * (-5.0f64).exp();
        let se = est * ((1.0 - acc) / n as f64).sqrt();
        assert!((est - exact).abs() < 4.0 * se, "{est} vs {exact}");
        // memoryless overshoot
        let mean = over.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt(), "{mean}");
    }
}

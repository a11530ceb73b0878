//! First-passage simulation: the direct event-driven simulator and exact
//! conditional samplers for P(· | τ_u < ∞).

mod chain;
mod direct;
mod forced;
pub mod noise;
pub mod oracle;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, NegativeComponent};
use crate::norming::NormingBundle;

pub use crate::stable_law::stable_increment;
pub use chain::{KilledPassage, KilledSubordinator};
use chain::{killed_from_chain, DriftChainSampler};
use forced::{pilot_bound, FluidForced, Proposal, StableForced, WeightTally};
use noise::{stream_rng, PathNoise, RngNoise};

/// Stream reserved for pilot runs; slots use streams 0..n.
const PILOT_STREAM: u64 = u64::MAX;

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];

/// One conditional passage record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageSample {
    pub replicate: u64,
    pub u: f64,
    pub tau: f64,
    /// Undershoot -X(τ-).
    pub z: f64,
    /// Overshoot X(τ) - u.
    pub o: f64,
    /// (s, X*(s τ)) with X* = -X.
    pub snapshots: Vec<(f64, f64)>,
    /// Proposals used for this record.
    pub attempts: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBudget {
    pub t_cap: f64,
    pub depth_cap: f64,
    pub max_events: u64,
}

impl Default for SimBudget {
    fn default() -> Self {
        Self { t_cap: 50.0, depth_cap: 50.0, max_events: 50_000_000 }
    }
}

impl SimBudget {
    pub fn validate(&self) -> Result<()> {
        if self.t_cap > 0.0 && self.depth_cap > 0.0 && self.max_events > 0 {
            Ok(())
        } else {
            Err(Error::Config(format!("budget entries must be positive: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Scripted noise ran out of gaps.
    StreamEnd,
    /// Past t_cap r(u) and below -depth_cap a(u).
    Budget,
    EventCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoPassage {
    pub elapsed: f64,
    pub position: f64,
    pub infimum: f64,
    pub events: u64,
    pub reason: StopReason,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Passage(FirstPassageSample),
    NoPassage(NoPassage),
}

impl Outcome {
    pub fn passed(&self) -> bool {
        matches!(self, Outcome::Passage(_))
    }
}

/// Run one path until passage above u or the budget stops it.
pub fn simulate_first_passage<N: PathNoise + ?Sized>(
    model: &ModelSpec,
    u: f64,
    noise: &mut N,
    budget: &SimBudget,
    fractions: &[f64],
) -> Result<Outcome> {
    model.validate()?;
    budget.validate()?;
    check_level(u)?;
    check_fractions(fractions)?;
    let nb = NormingBundle::new(model)?;
    let lim = direct::Limits { time: budget.t_cap * nb.r(u)?, depth: budget.depth_cap * nb.a(u)? };
    direct::run(model, u, noise, budget, &lim, fractions)
}

fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("level must be > 0, got {u}")))
    }
}

fn check_fractions(f: &[f64]) -> Result<()> {
    if f.iter().all(|&s| s > 0.0 && s <= 1.0) {
        Ok(())
    } else {
        Err(Error::Domain(format!("snapshot fractions must lie in (0, 1], got {f:?}")))
    }
}

/// Conditional sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Record chain for drift, forced jump for stable, direct otherwise.
    Auto,
    /// Plain rejection over direct paths.
    Direct,
    LadderChain,
    ForcedJump,
    /// Forced jump with the fluid time proposal; approximate at moderate u.
    ForcedFluid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRequest {
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
    pub method: Method,
    pub fractions: Vec<f64>,
    pub budget: SimBudget,
    /// Proposal ceiling per requested sample.
    pub max_attempts: u64,
}

impl SampleRequest {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            workers: 1,
            method: Method::Auto,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            budget: SimBudget::default(),
            max_attempts: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub method: Method,
    pub requested: usize,
    pub accepted: usize,
    pub attempts: u64,
    pub acceptance_rate: f64,
    /// Estimate of P(τ_u < ∞).
    pub p_hat: f64,
    pub p_ci: (f64, f64),
    pub shortfall: bool,
    /// Rejection bound on the weight (forced samplers).
    pub weight_bound: f64,
    /// Proposals whose weight exceeded the bound.
    pub weight_overflows: u64,
    /// Direct paths stopped by the budget rather than ending by passage.
    pub budget_stops: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSamples {
    pub samples: Vec<FirstPassageSample>,
    pub report: AcceptanceReport,
}

enum Sampler {
    Direct { lim: direct::Limits },
    Chain(DriftChainSampler),
    Stable(StableForced),
    Fluid(FluidForced),
}

struct SlotResult {
    sample: Option<FirstPassageSample>,
    attempts: u64,
    tally: WeightTally,
    budget_stops: u64,
}

fn resolve(model: &ModelSpec, method: Method) -> Method {
    match method {
        Method::Auto => match model.negative {
            NegativeComponent::Drift { .. } if model.positive.mean().is_some() => Method::LadderChain,
            NegativeComponent::StableSubordinator { .. } => Method::ForcedJump,
            _ => Method::Direct,
        },
        m => m,
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// n conditional samples at level u. Slot i draws from stream i of the seed,
/// so output does not depend on the worker count.
pub fn sample_conditional(model: &ModelSpec, u: f64, req: &SampleRequest) -> Result<ConditionalSamples> {
    model.validate()?;
    req.budget.validate()?;
    check_level(u)?;
    check_fractions(&req.fractions)?;
    if req.n == 0 {
        return Err(Error::Domain("sample count must be >= 1".into()));
    }
    let method = resolve(model, req.method);
    let nb = NormingBundle::new(model)?;
    let sampler = match method {
        Method::Direct => Sampler::Direct {
            lim: direct::Limits { time: req.budget.t_cap * nb.r(u)?, depth: req.budget.depth_cap * nb.a(u)? },
        },
        Method::LadderChain => Sampler::Chain(DriftChainSampler::new(model, u)?),
        Method::ForcedJump => {
            let mut s = StableForced::new(model, &nb, u)?;
            let mut rng = stream_rng(req.seed, PILOT_STREAM);
            s.bound = pilot_bound(|t| s.propose(&mut rng, &[], t))?;
            Sampler::Stable(s)
        }
        Method::ForcedFluid => {
            let mut s = FluidForced::new(model, u)?;
            let mut rng = stream_rng(req.seed, PILOT_STREAM);
            s.bound = pilot_bound(|t| s.propose(&mut rng, &[], t))?;
            Sampler::Fluid(s)
        }
        Method::Auto => unreachable!("resolved"),
    };
    let pool = thread_pool(req.workers)?;
    let slots: Vec<Result<SlotResult>> =
        pool.install(|| (0..req.n as u64).into_par_iter().map(|i| run_slot(model, u, &sampler, req, i)).collect());
    let mut samples = Vec::with_capacity(req.n);
    let (mut attempts, mut budget_stops) = (0u64, 0u64);
    let mut tally = WeightTally::default();
    for r in slots {
        let r = r?;
        attempts += r.attempts;
        budget_stops += r.budget_stops;
        tally.merge(&r.tally);
        if let Some(s) = r.sample {
            samples.push(s);
        }
    }
    let accepted = samples.len();
    let rate = accepted as f64 / attempts.max(1) as f64;
    let (lo, hi) = wilson(accepted as u64, attempts);
    let (p_hat, p_ci) = match &sampler {
        Sampler::Direct { .. } => (rate, (lo, hi)),
        Sampler::Chain(c) => {
            let n = c.n_u();
            (n * rate, (n * lo, n * hi))
        }
        Sampler::Stable(s) => weighted(s.ln_scale, &tally),
        Sampler::Fluid(s) => weighted(s.ln_scale, &tally),
    };
    Ok(ConditionalSamples {
        samples,
        report: AcceptanceReport {
            method,
            requested: req.n,
            accepted,
            attempts,
            acceptance_rate: rate,
            p_hat,
            p_ci,
            shortfall: accepted < req.n,
            weight_bound: match &sampler {
                Sampler::Stable(s) => s.bound,
                Sampler::Fluid(s) => s.bound,
                _ => 1.0,
            },
            weight_overflows: tally.overflows,
            budget_stops,
        },
    })
}

fn weighted(ln_scale: f64, t: &WeightTally) -> (f64, (f64, f64)) {
    let n = t.proposals.max(1) as f64;
    let m = t.weight_sum / n;
    let var = (t.weight_sq_sum / n - m * m).max(0.0);
    let se = (var / n).sqrt();
    let s = ln_scale.exp();
    (s * m, (s * (m - 1.96 * se).max(0.0), s * (m + 1.96 * se)))
}

/// 95% Wilson interval for k successes in n trials.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = k as f64 / n;
    let d = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / d;
    let h = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / d;
    ((c - h).max(0.0), (c + h).min(1.0))
}

fn run_slot(model: &ModelSpec, u: f64, sampler: &Sampler, req: &SampleRequest, slot: u64) -> Result<SlotResult> {
    let mut rng = stream_rng(req.seed, slot);
    let mut out = SlotResult { sample: None, attempts: 0, tally: WeightTally::default(), budget_stops: 0 };
    let fr = &req.fractions;
    match sampler {
        Sampler::Chain(c) => {
            if let Some(s) = c.sample(&mut rng, fr, req.max_attempts) {
                out.attempts = s.attempts;
                out.sample = Some(s);
            } else {
                out.attempts = req.max_attempts;
            }
        }
        Sampler::Direct { lim } => {
            let mut noise = RngNoise(&mut rng);
            while out.attempts < req.max_attempts {
                out.attempts += 1;
                match direct::run(model, u, &mut noise, &req.budget, lim, fr)? {
                    Outcome::Passage(s) => {
                        out.sample = Some(s);
                        break;
                    }
                    Outcome::NoPassage(np) => {
                        if np.reason != StopReason::StreamEnd {
                            out.budget_stops += 1;
                        }
                    }
                }
            }
        }
        Sampler::Stable(s) => forced_loop(&mut out, req, |tally| s.propose(&mut rng, fr, tally))?,
        Sampler::Fluid(s) => forced_loop(&mut out, req, |tally| s.propose(&mut rng, fr, tally))?,
    }
    if let Some(s) = out.sample.as_mut() {
        s.replicate = slot;
        s.attempts = out.attempts;
    }
    Ok(out)
}

fn forced_loop<F: FnMut(&mut WeightTally) -> Result<Proposal>>(out: &mut SlotResult, req: &SampleRequest, mut f: F) -> Result<()> {
    while out.attempts < req.max_attempts {
        out.attempts += 1;
        if let Proposal::Accepted(s) = f(&mut out.tally)? {
            out.sample = Some(s);
            break;
        }
    }
    Ok(())
}

/// Conditional passages of a killed subordinator through its record chain.
#[derive(Clone, Debug, PartialEq)]
pub struct KilledSamples {
    pub passages: Vec<KilledPassage>,
    pub attempts: u64,
    pub p_hat: f64,
    pub shortfall: bool,
}

pub fn sample_killed(
    k: &KilledSubordinator,
    u: f64,
    n: usize,
    seed: u64,
    workers: usize,
    max_attempts: u64,
) -> Result<KilledSamples> {
    check_level(u)?;
    let ch = k.chain(u)?;
    let pool = thread_pool(workers)?;
    let res: Vec<Option<KilledPassage>> = pool.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|i| killed_from_chain(&ch, &mut stream_rng(seed, i), max_attempts))
            .collect()
    });
    let attempts: u64 = res.iter().map(|r| r.map_or(max_attempts, |p| p.attempts)).sum();
    let passages: Vec<KilledPassage> = res.into_iter().flatten().collect();
    let p_hat = ch.n_u() * passages.len() as f64 / attempts.max(1) as f64;
    let shortfall = passages.len() < n;
    Ok(KilledSamples { passages, attempts, p_hat, shortfall })
}

/// Rejection sampling of the killed subordinator, one stream per slot.
pub fn sample_killed_naive(k: &KilledSubordinator, u: f64, n: usize, seed: u64, max_attempts: u64) -> Result<KilledSamples> {
    check_level(u)?;
    k.validate()?;
    let res: Vec<Option<KilledPassage>> =
        (0..n as u64).map(|i| k.naive(u, &mut stream_rng(seed, i), max_attempts)).collect();
    let attempts: u64 = res.iter().map(|r| r.map_or(max_attempts, |p| p.attempts)).sum();
    let passages: Vec<KilledPassage> = res.into_iter().flatten().collect();
    let p_hat = passages.len() as f64 / attempts.max(1) as f64;
    let shortfall = passages.len() < n;
    Ok(KilledSamples { passages, attempts, p_hat, shortfall })
}

pub const CSV_HEADER_FIXED: [&str; 5] = ["replicate", "u", "tau", "Z", "O"];

/// CSV with columns replicate,u,tau,Z,O,s1,x1,...,attempts; LF endings.
pub fn write_csv<W: std::io::Write>(samples: &[FirstPassageSample], fractions: usize, mut w: W) -> std::io::Result<()> {
    let mut head: Vec<String> = CSV_HEADER_FIXED.iter().map(|s| s.to_string()).collect();
    for i in 1..=fractions {
        head.push(format!("s{i}"));
        head.push(format!("x{i}"));
    }
    head.push("attempts".into());
    writeln!(w, "{}", head.join(","))?;
    let mut sorted: Vec<&FirstPassageSample> = samples.iter().collect();
    sorted.sort_by_key(|s| s.replicate);
    for s in sorted {
        let mut row = format!("{},{},{},{},{}", s.replicate, s.u, s.tau, s.z, s.o);
        for &(a, b) in &s.snapshots {
            row.push_str(&format!(",{a},{b}"));
        }
        row.push_str(&format!(",{}\n", s.attempts));
        w.write_all(row.as_bytes())?;
    }
    Ok(())
}

/// Parse a CSV produced by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<FirstPassageSample>> {
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().ok_or_else(|| Error::Config("empty sample file".into()))?.split(',').collect();
    if head.len() < 6 || head[..5] != CSV_HEADER_FIXED || head[head.len() - 1] != "attempts" || (head.len() - 6) % 2 != 0 {
        return Err(Error::Config(format!("unexpected sample header {head:?}")));
    }
    let k = (head.len() - 6) / 2;
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != head.len() {
            return Err(Error::Config(format!("row {} has {} fields, expected {}", ln + 2, f.len(), head.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse::<f64>().map_err(|e| Error::Config(format!("row {} field {}: {e}", ln + 2, head[i])))
        };
        let int = |i: usize| -> Result<u64> {
            f[i].parse::<u64>().map_err(|e| Error::Config(format!("row {} field {}: {e}", ln + 2, head[i])))
        };
        let mut snaps = Vec::with_capacity(k);
        for j in 0..k {
            snaps.push((num(5 + 2 * j)?, num(6 + 2 * j)?));
        }
        out.push(FirstPassageSample {
            replicate: int(0)?,
            u: num(1)?,
            tau: num(2)?,
            z: num(3)?,
            o: num(4)?,
            snapshots: snaps,
            attempts: int(head.len() - 1)?,
        });
    }
    Ok(out)
}

/// Draw `n` standard increments over dt and return them (used by checks).
pub fn stable_increments<R: Rng>(gbar: f64, dt: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let idx = crate::stable_law::StableIndex::new(gbar)?;
    Ok((0..n).map(|_| stable_increment(idx, dt, rng)).collect())
}

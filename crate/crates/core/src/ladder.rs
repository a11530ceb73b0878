//! Ladder-height estimation through the random-walk embedding X_t = S_{N_t}
//! with unit-rate N, and numerical checks of the identities linking the
//! ladder measures to the Lévy measure.
//!
//! In the embedding the ascending ladder process is compound Poisson with
//! jump law P(Z_1 ∈ dx), Z_1 the first strict ascending ladder height, so
//! Π_H(dx) = P(Z_1 ∈ dx, Z_1 < ∞) and q = P(Z_1 = ∞). Likewise
//! Π_{H*}(dx) = P(Z*_1 ∈ dx) for the first weak descending ladder height,
//! and G*(x) = Σ_{n≥0} P(Z*_n ≤ x) with the atom at 0.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::JumpFamily;
use crate::simulate::noise::stream_rng;
use crate::simulate::{sample_killed, sample_killed_naive, KilledSubordinator};
use crate::special::norm_quantile;

/// Downward step of the walk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeStep {
    Law(JumpFamily),
    /// Deterministic step of the given size.
    Constant(f64),
}

impl NegativeStep {
    fn survival_closed(&self, x: f64) -> f64 {
        match *self {
            NegativeStep::Law(f) => {
                if x <= 0.0 {
                    1.0
                } else {
                    f.survival(x)
                }
            }
            NegativeStep::Constant(c) => (c >= x) as i32 as f64,
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            NegativeStep::Law(f) => f.mean().unwrap_or(f64::INFINITY),
            NegativeStep::Constant(c) => c,
        }
    }
}

/// S_1 = +J₊ with probability p₊, else -J₋.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub p_plus: f64,
    pub positive: JumpFamily,
    pub negative: NegativeStep,
}

impl WalkSpec {
    pub fn new(p_plus: f64, positive: JumpFamily, negative: NegativeStep) -> Result<Self> {
        let w = Self { p_plus, positive, negative };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_plus) {
            return Err(Error::Model(format!("p_plus must lie in [0, 1), got {}", self.p_plus)));
        }
        self.positive.validate()?;
        match self.negative {
            NegativeStep::Law(f) => f.validate()?,
            NegativeStep::Constant(c) if c > 0.0 && c.is_finite() => {}
            NegativeStep::Constant(c) => return Err(Error::Model(format!("constant step must be > 0, got {c}"))),
        }
        let pm = self.positive.mean().unwrap_or(f64::INFINITY);
        let nm = self.negative.mean();
        if self.p_plus > 0.0 && pm.is_infinite() && nm.is_infinite() {
            return Err(Error::Model("walk mean undefined: both step means infinite".into()));
        }
        let m = self.mean();
        if !(m < 0.0) {
            return Err(Error::Model(format!("walk must drift to -inf, E S_1 = {m}")));
        }
        Ok(())
    }

    /// E S_1; -inf when the negative step has infinite mean.
    pub fn mean(&self) -> f64 {
        let pm = if self.p_plus > 0.0 { self.p_plus * self.positive.mean().unwrap_or(f64::INFINITY) } else { 0.0 };
        pm - (1.0 - self.p_plus) * self.negative.mean()
    }

    /// P(S_1 > x), x > 0.
    pub fn tail_plus(&self, x: f64) -> f64 {
        self.p_plus * self.positive.survival(x.max(0.0))
    }

    /// P(S_1 ≤ -x), x > 0.
    pub fn tail_minus(&self, x: f64) -> f64 {
        (1.0 - self.p_plus) * self.negative.survival_closed(x)
    }

    /// ∫_1^x P(S_1 ≤ -y) dy.
    pub fn a_star(&self, x: f64) -> Result<f64> {
        if x <= 1.0 {
            return Ok(0.0);
        }
        let i = match self.negative {
            NegativeStep::Law(f) => f.integral_from_one(x)?,
            NegativeStep::Constant(c) => (c.min(x) - 1.0).max(0.0),
        };
        Ok((1.0 - self.p_plus) * i)
    }

    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.p_plus > 0.0 && rng.random::<f64>() < self.p_plus {
            self.positive.sample(rng)
        } else {
            match self.negative {
                NegativeStep::Law(f) => -f.sample(rng),
                NegativeStep::Constant(c) => -c,
            }
        }
    }
}

/// Geometric grid on [lo, hi].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { lo: 0.1, hi: 20.0, cells: 64 }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.cells >= 1) {
            return Err(Error::Grid(format!("bad grid {self:?}")));
        }
        let r = (self.hi / self.lo).ln() / self.cells as f64;
        let mut v: Vec<f64> = (0..=self.cells).map(|i| self.lo * (r * i as f64).exp()).collect();
        v[self.cells] = self.hi;
        Ok(v)
    }
}

/// Minimum count per tail cell before merging.
pub const MIN_CELL_COUNT: u64 = 30;

/// Cell edges after merging top cells holding fewer than `min` samples.
pub fn merge_tail_cells(edges: &[f64], samples: &[f64], min: u64) -> Vec<f64> {
    let mut e = edges.to_vec();
    let count = |a: f64, b: f64| samples.iter().filter(|&&z| z >= a && z < b).count() as u64;
    while e.len() > 2 && count(e[e.len() - 2], e[e.len() - 1]) < min {
        let last = e.pop().expect("len > 2");
        let n = e.len();
        e[n - 1] = last;
    }
    e
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub n_paths: u64,
    /// Step cap per path.
    pub horizon: u64,
    /// A path stops once it is this far below its running maximum.
    pub depth: f64,
    /// Independent batches; CIs come from batch means.
    pub batches: usize,
    pub seed: u64,
    pub workers: usize,
    pub grid: GridSpec,
}

impl LadderConfig {
    pub fn new(n_paths: u64, seed: u64) -> Self {
        Self { n_paths, horizon: 100_000, depth: 200.0, batches: 50, seed, workers: 1, grid: GridSpec::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.batches == 0 || self.n_paths < self.batches as u64 {
            return Err(Error::Config("need n_paths >= batches >= 1".into()));
        }
        if self.horizon == 0 || !(self.depth > 0.0) {
            return Err(Error::Config("horizon and depth must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.grid.points().map(|_| ())
    }
}

/// Fine histogram width for the descending renewal measure.
const FINE: f64 = 1.0 / 64.0;

#[derive(Clone, Debug, Default)]
struct Batch {
    paths: u64,
    /// Finite first strict ascending ladder heights.
    z1: Vec<f64>,
    /// First weak descending ladder heights.
    zs1: Vec<f64>,
    /// Σ P(Poisson(1) ≤ K), K = number of strict ladder epochs.
    poisson_cdf: f64,
    /// Counts of Z*_n, n ≥ 1, below each grid point.
    g_counts: Vec<u64>,
    /// (count, Σ y) per fine cell of Z*_n, n ≥ 1.
    fine: Vec<(u64, f64)>,
    late_max: u64,
    horizon_stops: u64,
}

fn poisson1_cdf(k: u64) -> f64 {
    let mut term = (-1.0f64).exp();
    let mut s = term;
    for j in 1..=k.min(40) {
        term /= j as f64;
        s += term;
    }
    s.min(1.0)
}

fn run_batch(walk: &WalkSpec, cfg: &LadderConfig, grid: &[f64], b: usize, paths: u64) -> Batch {
    let mut rng = stream_rng(cfg.seed, b as u64);
    let nfine = ((cfg.depth + 64.0) / FINE) as usize + 1;
    let mut out = Batch { paths, g_counts: vec![0; grid.len()], fine: vec![(0, 0.0); nfine], ..Batch::default() };
    let late = cfg.horizon - cfg.horizon / 10;
    for _ in 0..paths {
        let (mut s, mut max, mut min) = (0.0f64, 0.0f64, 0.0f64);
        let (mut k, mut last_max) = (0u64, 0u64);
        let mut seen_down = false;
        let mut n = 0u64;
        loop {
            n += 1;
            s += walk.sample_step(&mut rng);
            if s > max {
                max = s;
                k += 1;
                last_max = n;
                if k == 1 {
                    out.z1.push(s);
                }
            }
            if s <= min {
                min = s;
                let y = -s;
                if !seen_down {
                    seen_down = true;
                    out.zs1.push(y);
                }
                let gi = grid.partition_point(|&g| g < y);
                if gi < grid.len() {
                    out.g_counts[gi] += 1;
                }
                let fi = ((y / FINE) as usize).min(nfine - 1);
                out.fine[fi].0 += 1;
                out.fine[fi].1 += y;
            }
            if s < max - cfg.depth {
                break;
            }
            if n >= cfg.horizon {
                out.horizon_stops += 1;
                break;
            }
        }
        if !seen_down {
            out.zs1.push(f64::INFINITY);
        }
        if last_max > late {
            out.late_max += 1;
        }
        out.poisson_cdf += poisson1_cdf(k);
    }
    // cumulative counts at grid points
    for i in 1..out.g_counts.len() {
        out.g_counts[i] += out.g_counts[i - 1];
    }
    out.zs1.sort_by(f64::total_cmp);
    out.z1.sort_by(f64::total_cmp);
    out
}

impl Batch {
    fn p(&self) -> f64 {
        self.z1.len() as f64 / self.paths as f64
    }

    /// P̂(u < Z_1 < ∞).
    fn pi_h(&self, u: f64) -> f64 {
        let i = self.z1.partition_point(|&z| z <= u);
        (self.z1.len() - i) as f64 / self.paths as f64
    }

    /// P̂(Z*_1 > y).
    fn pi_hs(&self, y: f64) -> f64 {
        let i = self.zs1.partition_point(|&z| z <= y);
        (self.zs1.len() - i) as f64 / self.zs1.len() as f64
    }

    fn mean_hs(&self) -> f64 {
        self.zs1.iter().sum::<f64>() / self.zs1.len() as f64
    }

    /// Ê min(Z*_1, x) = ∫_0^x Π̂_{H*}.
    fn a_hs(&self, x: f64) -> f64 {
        self.zs1.iter().map(|&z| z.min(x)).sum::<f64>() / self.zs1.len() as f64
    }
}

/// Value with standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridValue {
    pub x: f64,
    pub value: f64,
    pub se: f64,
}

/// Killing-rate estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KillingEstimate {
    /// q̂ = 1 - P̂(Z_1 < ∞).
    Rate { q: f64, se: f64 },
    /// No path ever made a strict ascending ladder epoch: P̂(Z_1 < ∞) = 0,
    /// Π̂_H ≡ 0 and -ln P̂ = ∞.
    NoStrictLadder,
}

impl KillingEstimate {
    pub fn q(&self) -> f64 {
        match *self {
            KillingEstimate::Rate { q, .. } => q,
            KillingEstimate::NoStrictLadder => 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderEstimate {
    pub walk: WalkSpec,
    pub n_paths: u64,
    pub horizon: u64,
    pub depth: f64,
    pub grid: Vec<f64>,
    pub killing: KillingEstimate,
    /// P̂(Z_1 < ∞).
    pub p_hat: f64,
    /// Π̄_H on the grid after tail-cell merging.
    pub pi_h_tail: Vec<GridValue>,
    pub pi_hstar_tail: Vec<GridValue>,
    pub gstar: Vec<GridValue>,
    pub a_hstar: Vec<GridValue>,
    pub mean_hstar: GridValue,
    /// Fraction of paths whose last strict maximum fell in the final 10% of the horizon.
    pub late_max_fraction: f64,
    /// Fraction of paths stopped by the step cap instead of the depth rule.
    pub horizon_stop_fraction: f64,
    #[serde(skip)]
    batches: Vec<Batch>,
}

/// Largest tolerated `late_max_fraction`.
pub const LATE_MAX_TOLERANCE: f64 = 1e-3;

impl LadderEstimate {
    pub fn horizon_ok(&self) -> bool {
        self.late_max_fraction < LATE_MAX_TOLERANCE
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn over_batches(bs: &[Batch], f: impl Fn(&Batch) -> f64) -> (f64, f64) {
    mean_se(&bs.iter().map(f).collect::<Vec<_>>())
}

pub fn estimate_ladder(walk: &WalkSpec, cfg: &LadderConfig) -> Result<LadderEstimate> {
    walk.validate()?;
    cfg.validate()?;
    let grid = cfg.grid.points()?;
    let nb = cfg.batches as u64;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let batches: Vec<Batch> = pool.install(|| {
        (0..cfg.batches)
            .into_par_iter()
            .map(|b| {
                let paths = cfg.n_paths / nb + u64::from((b as u64) < cfg.n_paths % nb);
                run_batch(walk, cfg, &grid, b, paths)
            })
            .collect()
    });
    let total: u64 = batches.iter().map(|b| b.paths).sum();
    let finite: usize = batches.iter().map(|b| b.z1.len()).sum();
    let p_hat = finite as f64 / total as f64;
    let killing = if finite == 0 {
        KillingEstimate::NoStrictLadder
    } else {
        let (p, se) = over_batches(&batches, Batch::p);
        KillingEstimate::Rate { q: 1.0 - p, se }
    };
    let all_z1: Vec<f64> = batches.iter().flat_map(|b| b.z1.iter().copied()).collect();
    let merged = merge_tail_cells(&grid, &all_z1, MIN_CELL_COUNT);
    let at = |xs: &[f64], f: &dyn Fn(&Batch, f64) -> f64| -> Vec<GridValue> {
        xs.iter()
            .map(|&x| {
                let (value, se) = over_batches(&batches, |b| f(b, x));
                GridValue { x, value, se }
            })
            .collect()
    };
    let pi_h_tail = at(&merged, &|b, x| b.pi_h(x));
    let pi_hstar_tail = at(&grid, &|b, x| b.pi_hs(x));
    let a_hstar = at(&grid, &|b, x| b.a_hs(x));
    let gstar: Vec<GridValue> = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (value, se) = over_batches(&batches, |b| 1.0 + b.g_counts[i] as f64 / b.paths as f64);
            GridValue { x, value, se }
        })
        .collect();
    let (mh, mh_se) = over_batches(&batches, Batch::mean_hs);
    let late: u64 = batches.iter().map(|b| b.late_max).sum();
    let stops: u64 = batches.iter().map(|b| b.horizon_stops).sum();
    Ok(LadderEstimate {
        walk: *walk,
        n_paths: total,
        horizon: cfg.horizon,
        depth: cfg.depth,
        grid,
        killing,
        p_hat,
        pi_h_tail,
        pi_hstar_tail,
        gstar,
        a_hstar,
        mean_hstar: GridValue { x: f64::INFINITY, value: mh, se: mh_se },
        late_max_fraction: late as f64 / total as f64,
        horizon_stop_fraction: stops as f64 / total as f64,
        batches,
    })
}

/// One row of an identity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub u: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs - rhs.
    pub diff: f64,
    pub se: f64,
    /// Critical value of the simultaneous band.
    pub crit: f64,
    pub rel_error: f64,
    pub pass: bool,
}

/// Two-sided simultaneous 95% critical value for k comparisons from
/// batch means over `b` batches (Bonferroni, small-sample corrected).
pub fn band_critical(k: usize, b: usize) -> f64 {
    let z = norm_quantile(1.0 - 0.025 / k.max(1) as f64);
    let df = (b.max(2) - 1) as f64;
    // first two Cornish-Fisher terms of the Student t quantile
    z + (z.powi(3) + z) / (4.0 * df) + (5.0 * z.powi(5) + 16.0 * z.powi(3) + 3.0 * z) / (96.0 * df * df)
}

/// Per-unit values of `f(batch, partner, u)`. Paired units use disjoint
/// batches (2j, 2j+1), symmetrised, so units stay independent.
fn unit_values(bs: &[Batch], paired: bool, u: f64, f: &dyn Fn(&Batch, &Batch, f64) -> f64) -> Vec<f64> {
    if paired && bs.len() >= 2 {
        bs.chunks_exact(2).map(|c| 0.5 * (f(&c[0], &c[1], u) + f(&c[1], &c[0], u))).collect()
    } else {
        bs.iter().map(|b| f(b, b, u)).collect()
    }
}

type Side<'a> = &'a dyn Fn(&Batch, &Batch, f64) -> f64;

fn rows(us: &[f64], bs: &[Batch], paired: bool, lhs: Side, rhs: Side) -> Vec<IdentityRow> {
    rows_in_family(us, bs, paired, us.len(), lhs, rhs)
}

/// As [`rows`], with the band widened to cover `family` comparisons.
fn rows_in_family(us: &[f64], bs: &[Batch], paired: bool, family: usize, lhs: Side, rhs: Side) -> Vec<IdentityRow> {
    let units = if paired && bs.len() >= 2 { bs.len() / 2 } else { bs.len() };
    let crit = band_critical(family, units);
    us.iter()
        .map(|&u| {
            let l = unit_values(bs, paired, u, lhs);
            let r = unit_values(bs, paired, u, rhs);
            let d: Vec<f64> = l.iter().zip(&r).map(|(a, b)| a - b).collect();
            let (lm, _) = mean_se(&l);
            let (rm, _) = mean_se(&r);
            let (dm, se) = mean_se(&d);
            let pass = if se > 0.0 { dm.abs() <= crit * se } else { dm == 0.0 };
            IdentityRow { u, lhs: lm, rhs: rm, diff: dm, se, crit, rel_error: dm / lm, pass }
        })
        .collect()
}

fn check_range(est: &LadderEstimate, us: &[f64]) -> Result<()> {
    let (lo, hi) = (est.grid[0], est.grid[est.grid.len() - 1]);
    match us.iter().find(|&&u| !(u >= lo && u <= hi)) {
        Some(u) => Err(Error::Grid(format!("level {u} outside the estimate grid [{lo}, {hi}]"))),
        None => Ok(()),
    }
}

/// Σ over the descending renewal measure of `tail(y + u)`, per path.
fn renewal_sum(b: &Batch, tail: &dyn Fn(f64) -> f64, u: f64) -> f64 {
    let mut s = tail(u) * b.paths as f64;
    for &(c, sy) in &b.fine {
        if c > 0 {
            s += c as f64 * tail(sy / c as f64 + u);
        }
    }
    s / b.paths as f64
}

/// Π̄_H(u) against ∫ tail(y + u) G*(dy), with `tail` the positive Lévy tail.
pub fn check_vigon_inverse_with(est: &LadderEstimate, tail: &dyn Fn(f64) -> f64, us: &[f64]) -> Result<Vec<IdentityRow>> {
    inverse_in_family(est, tail, us, us.len())
}

fn inverse_in_family(est: &LadderEstimate, tail: &dyn Fn(f64) -> f64, us: &[f64], family: usize) -> Result<Vec<IdentityRow>> {
    check_range(est, us)?;
    Ok(rows_in_family(us, &est.batches, false, family, &|b, _, u| b.pi_h(u), &|b, _, u| renewal_sum(b, tail, u)))
}

pub fn check_vigon_inverse(est: &LadderEstimate, us: &[f64]) -> Result<Vec<IdentityRow>> {
    let w = est.walk;
    check_vigon_inverse_with(est, &|x| w.tail_plus(x), us)
}

/// Positive tail against ∫ Π̄_{H*}(y) Π_H(u + dy).
pub fn check_vigon_positive(est: &LadderEstimate, us: &[f64]) -> Result<Vec<IdentityRow>> {
    positive_in_family(est, us, us.len())
}

fn positive_in_family(est: &LadderEstimate, us: &[f64], family: usize) -> Result<Vec<IdentityRow>> {
    check_range(est, us)?;
    let w = est.walk;
    Ok(rows_in_family(
        us,
        &est.batches,
        true,
        family,
        &|_, _, u| w.tail_plus(u),
        &|b, o, u| {
            let k = b.z1.partition_point(|&z| z <= u);
            b.z1[k..].iter().map(|&z| o.pi_hs(z - u)).sum::<f64>() / b.paths as f64
        },
    ))
}

/// Negative tail against ∫ Π̄_H(y) Π_{H*}(u + dy) + q Π̄_{H*}(u).
pub fn check_vigon_negative(est: &LadderEstimate, us: &[f64]) -> Result<Vec<IdentityRow>> {
    negative_in_family(est, us, us.len())
}

fn negative_in_family(est: &LadderEstimate, us: &[f64], family: usize) -> Result<Vec<IdentityRow>> {
    check_range(est, us)?;
    let w = est.walk;
    Ok(rows_in_family(
        us,
        &est.batches,
        true,
        family,
        &|_, _, u| w.tail_minus(u),
        &|b, o, u| {
            let k = b.zs1.partition_point(|&z| z <= u);
            let conv = b.zs1[k..].iter().filter(|z| z.is_finite()).map(|&z| o.pi_h(z - u)).sum::<f64>() / b.zs1.len() as f64;
            conv + (1.0 - o.p()) * o.pi_hs(u)
        },
    ))
}

/// The three identities on `us` with one simultaneous 95% band over all
/// 3 × `us.len()` comparisons.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VigonChecks {
    pub inverse: Vec<IdentityRow>,
    pub positive: Vec<IdentityRow>,
    pub negative: Vec<IdentityRow>,
}

impl VigonChecks {
    pub fn pass(&self) -> bool {
        self.inverse.iter().chain(&self.positive).chain(&self.negative).all(|r| r.pass)
    }
}

pub fn check_vigon_all(est: &LadderEstimate, us: &[f64]) -> Result<VigonChecks> {
    let w = est.walk;
    let k = 3 * us.len();
    Ok(VigonChecks {
        inverse: inverse_in_family(est, &|x| w.tail_plus(x), us, k)?,
        positive: positive_in_family(est, us, k)?,
        negative: negative_in_family(est, us, k)?,
    })
}

/// e^{-q̂} against P̂(H_1 < ∞) = Ê P(Poisson(1) ≤ K).
pub fn check_killing_consistency(est: &LadderEstimate) -> IdentityRow {
    rows(&[1.0], &est.batches, false, &|b, _, _| (-(1.0 - b.p())).exp(), &|b, _, _| b.poisson_cdf / b.paths as f64)[0]
}

/// |E S_1| against q̂ Ê H*_1 (finite-mean walks).
pub fn check_mean_identity(est: &LadderEstimate) -> Result<IdentityRow> {
    let m = est.walk.mean();
    if !m.is_finite() {
        return Err(Error::Domain("mean identity needs a finite-mean walk".into()));
    }
    Ok(rows(&[1.0], &est.batches, true, &|_, _, _| -m, &|b, o, _| (1.0 - o.p()) * b.mean_hs())[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub x: f64,
    /// A*_X(x) / A_{H*}(x); `None` where both integrals are empty.
    pub ratio: Option<f64>,
    pub se: f64,
    pub q_hat: f64,
}

/// A*_X(x) / A_{H*}(x) on `xs`.
pub fn check_prop_q(est: &LadderEstimate, xs: &[f64]) -> Result<Vec<RatioRow>> {
    let q = est.killing.q();
    xs.iter()
        .map(|&x| {
            if x <= 1.0 {
                return Ok(RatioRow { x, ratio: None, se: f64::NAN, q_hat: q });
            }
            let a = est.walk.a_star(x)?;
            let (r, se) = over_batches(&est.batches, |b| a / b.a_hs(x));
            Ok(RatioRow { x, ratio: Some(r), se, q_hat: q })
        })
        .collect()
}

/// Slope of Ĝ* between the grid points nearest x0 and x1, with its
/// standard error.
pub fn gstar_slope(est: &LadderEstimate, x0: f64, x1: f64) -> Result<(f64, f64)> {
    check_range(est, &[x0, x1])?;
    let idx = |x: f64| -> usize {
        (0..est.grid.len()).min_by(|&a, &b| (est.grid[a] - x).abs().total_cmp(&(est.grid[b] - x).abs())).expect("nonempty grid")
    };
    let (i0, i1) = (idx(x0), idx(x1));
    if i1 <= i0 {
        return Err(Error::Grid("slope needs x1 > x0".into()));
    }
    let dx = est.grid[i1] - est.grid[i0];
    Ok(over_batches(&est.batches, |b| (b.g_counts[i1] - b.g_counts[i0]) as f64 / b.paths as f64 / dx))
}

/// How conditional passages of the killed subordinator are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KilledMethod {
    /// Exact record-chain sampler.
    Chain,
    /// Plain rejection.
    Rejection,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KilledOvershoot {
    pub u: f64,
    pub a_u: f64,
    /// O / a(u).
    pub normalized: Vec<f64>,
    pub p_hat: f64,
    pub attempts: u64,
    /// Replicates killed before their first jump (rejection only).
    pub killed_before_first_jump: u64,
    pub shortfall: bool,
}

/// Norming a(u) of the overshoot: u for Pareto jumps, the mean excess otherwise.
pub fn killed_norming(jumps: &JumpFamily, u: f64) -> Result<f64> {
    match jumps {
        JumpFamily::Pareto { .. } => Ok(u),
        f => f.mean_excess(u),
    }
}

pub fn overshoot_killed_subordinator(
    sub: &KilledSubordinator,
    u: f64,
    n: usize,
    seed: u64,
    workers: usize,
    method: KilledMethod,
) -> Result<KilledOvershoot> {
    sub.validate()?;
    let a_u = killed_norming(&sub.jumps, u)?;
    let max_attempts = 100_000_000;
    let r = match method {
        KilledMethod::Chain => sample_killed(sub, u, n, seed, workers, max_attempts)?,
        KilledMethod::Rejection => sample_killed_naive(sub, u, n, seed, max_attempts)?,
    };
    Ok(KilledOvershoot {
        u,
        a_u,
        normalized: r.passages.iter().map(|p| p.overshoot / a_u).collect(),
        p_hat: r.p_hat,
        attempts: r.attempts,
        killed_before_first_jump: r.passages.iter().map(|p| p.early_kills).sum(),
        shortfall: r.shortfall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_cdf_values() {
        assert!((poisson1_cdf(0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((poisson1_cdf(1) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((poisson1_cdf(100) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_merging_keeps_outer_edge() {
        let edges = [0.0, 1.0, 2.0, 3.0, 4.0];
        let s: Vec<f64> = (0..100).map(|i| i as f64 * 0.02).collect();
        let m = merge_tail_cells(&edges, &s, 30);
        assert_eq!(m, vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn band_critical_reduces_to_normal() {
        assert!((band_critical(1, 1_000_000) - 1.959_963_984_540_054).abs() < 1e-5);
        assert!(band_critical(9, 50) > band_critical(9, 1_000_000));
    }
}

//! Distances between normalised samples and limit laws, binned local density
//! checks, stratified conditional overshoot checks and convergence tables.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::limit_laws::{
    fdd_theta_tabulated, passage_local_gamma0_cdf, u_marginal_cdf, v_marginal_cdf, LawParams, WCdfTable,
};
use crate::model::{Case, ModelSpec};
use crate::norming::NormingBundle;
use crate::quad::{integrate, integrate_upper, QuadOptions};
use crate::simulate::FirstPassageSample;
use crate::special::norm_quantile;
use crate::stable_law::{H1Table, StableIndex};

/// Right-continuous empirical distribution function.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return domain("empirical CDF of an empty sample");
        }
        if samples.iter().any(|x| x.is_nan()) {
            return domain("sample contains NaN");
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples ≤ x.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// Smallest sample with ecdf ≥ p.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

pub fn ecdf(samples: &[f64]) -> Result<Ecdf> {
    Ecdf::new(samples)
}

/// sup |F_n - F| over the sample, both one-sided gaps.
pub fn try_ks_distance(samples: &[f64], cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let e = Ecdf::new(samples)?;
    let n = e.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in e.sorted.iter().enumerate() {
        let f = cdf(x)?;
        if !(0.0..=1.0).contains(&f) {
            return domain(format!("target CDF value {f} at {x} outside [0, 1]"));
        }
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    try_ks_distance(samples, |x| Ok(cdf(x)))
}

/// Two-sample KS statistic.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ea, eb) = (Ecdf::new(a)?, Ecdf::new(b)?);
    let d = ea.sorted.iter().chain(&eb.sorted).fold(0.0f64, |d, &x| d.max((ea.eval(x) - eb.eval(x)).abs()));
    Ok(d)
}

/// ε with 2 e^{-2nε²} = α.
pub fn dkw_bound(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// DKW bound on P(KS > ε).
pub fn dkw_probability(n: usize, eps: f64) -> f64 {
    (2.0 * (-2.0 * n as f64 * eps * eps).exp()).min(1.0)
}

/// ∫_0^1 |Q_n(p) - Q(p)| dp, each order-statistic cell integrated to 1e-6.
pub fn wasserstein1(samples: &[f64], quantile: impl Fn(f64) -> f64) -> Result<f64> {
    let e = Ecdf::new(samples)?;
    let n = e.len() as f64;
    let opts = QuadOptions::rel(1e-6).with_abs(1e-6 / n);
    let mut total = 0.0;
    for (i, &x) in e.sorted.iter().enumerate() {
        let q = integrate(|p| (x - quantile(p)).abs(), i as f64 / n, (i + 1) as f64 / n, opts)?;
        total += q.value;
    }
    Ok(total)
}

/// ∫ |F_n - F| dx for a law on [0, ∞), when only the CDF is available.
/// Samples may fall below 0.
pub fn wasserstein1_cdf(samples: &[f64], cdf: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let e = Ecdf::new(samples)?;
    let n = e.len() as f64;
    let opts = QuadOptions::rel(1e-6).with_abs(1e-9);
    let err = std::sync::Mutex::new(None);
    let f = |x: f64| match cdf(x) {
        Ok(v) => v,
        Err(e) => {
            err.lock().expect("poisoned").get_or_insert(e);
            0.0
        }
    };
    let x1 = e.sorted[0];
    let mut total = if x1 > 0.0 { integrate(&f, 0.0, x1, opts)?.value } else { 0.0 };
    for i in 1..e.len() {
        let (a, b) = (e.sorted[i - 1], e.sorted[i]);
        if b > a {
            let level = i as f64 / n;
            total += integrate(|x| (level - f(x)).abs(), a, b, opts)?.value;
        }
    }
    // x = x_n + e^s - 1 turns power tails into exponential ones
    let xn = e.sorted[e.len() - 1];
    total += integrate_upper(|s| (1.0 - f(xn + s.exp_m1())) * s.exp(), 0.0, opts)?.value;
    if let Some(e) = err.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileRow {
    pub p: f64,
    pub empirical: f64,
    /// Target CDF at the empirical quantile.
    pub target_cdf: f64,
}

pub const REPORT_QUANTILES: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfReport {
    pub n: usize,
    pub ks: f64,
    /// `None` when the target has no finite first moment or the integral failed.
    pub wasserstein: Option<f64>,
    pub quantiles: Vec<QuantileRow>,
    pub target: String,
    pub normalization: String,
}

pub fn ecdf_report(samples: &[f64], cdf: &dyn Fn(f64) -> Result<f64>, target: &str, normalization: &str) -> Result<EcdfReport> {
    let e = Ecdf::new(samples)?;
    let ks = try_ks_distance(samples, cdf)?;
    let wasserstein = wasserstein1_cdf(samples, cdf).ok().filter(|w| w.is_finite());
    let quantiles = REPORT_QUANTILES
        .iter()
        .map(|&p| {
            let q = e.quantile(p);
            Ok(QuantileRow { p, empirical: q, target_cdf: cdf(q)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EcdfReport { n: e.len(), ks, wasserstein, quantiles, target: target.into(), normalization: normalization.into() })
}

/// Default local-check windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Windows {
    pub z: [f64; 2],
    pub t: [f64; 2],
}

impl Default for Windows {
    fn default() -> Self {
        Self { z: [0.1, 3.0], t: [0.1, 3.0] }
    }
}

impl Windows {
    pub fn validate(&self) -> Result<()> {
        for (name, [a, b]) in [("z", self.z), ("t", self.t)] {
            if !(a > 0.0 && b > a && b.is_finite()) {
                return Err(Error::Config(format!("bad {name} window [{a}, {b}]")));
            }
        }
        Ok(())
    }
}

/// Minimum count per local bin before merging.
pub const MIN_BIN_COUNT: u64 = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalBin {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub count: u64,
    /// n × target mass of the bin.
    pub expected: f64,
    /// count / (n × volume).
    pub scaled: f64,
    /// Bin average of the target density.
    pub target: f64,
    /// Target density at the bin centre.
    pub center_target: f64,
    /// 95% Poisson interval for the scaled frequency.
    pub ci: [f64; 2],
    pub rel_error: f64,
    /// `None` for rows too sparse to check.
    pub pass: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalStatus {
    Checked,
    InsufficientData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalCheck {
    pub n: usize,
    pub bins: Vec<LocalBin>,
    /// Fraction of checked bins whose interval covers the target.
    pub pass_fraction: Option<f64>,
    pub status: LocalStatus,
}

impl LocalCheck {
    pub fn checked(&self) -> usize {
        self.bins.iter().filter(|b| b.pass.is_some()).count()
    }
}

/// 95% interval for a Poisson mean given count k (Wilson-Hilferty).
pub fn poisson_interval(k: u64) -> [f64; 2] {
    let z = norm_quantile(0.975);
    let lo = if k == 0 {
        0.0
    } else {
        let k = k as f64;
        k * (1.0 - 1.0 / (9.0 * k) - z / (3.0 * k.sqrt())).powi(3)
    };
    let k1 = k as f64 + 1.0;
    let hi = k1 * (1.0 - 1.0 / (9.0 * k1) + z / (3.0 * k1.sqrt())).powi(3);
    [lo.max(0.0), hi]
}

pub fn uniform_edges(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect();
    e[cells] = hi;
    e
}

// 3-point Gauss-Legendre on [-1, 1]
const GL_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Average of `density` over the box by tensor Gauss-Legendre.
fn box_average(lo: &[f64], hi: &[f64], density: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let d = lo.len();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut s = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..d {
            x[k] = 0.5 * (lo[k] + hi[k]) + 0.5 * (hi[k] - lo[k]) * GL_X[idx[k]];
            w *= 0.5 * GL_W[idx[k]];
        }
        s += w * density(&x)?;
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < 3 {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            return Ok(s);
        }
    }
}

const CUBATURE_REL: f64 = 1e-4;
const CUBATURE_DEPTH: u32 = 5;

fn children(lo: &[f64], hi: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = lo.len();
    (0..1usize << d)
        .map(|m| {
            let mut a = lo.to_vec();
            let mut b = hi.to_vec();
            for k in 0..d {
                let mid = 0.5 * (lo[k] + hi[k]);
                if m >> k & 1 == 0 {
                    b[k] = mid;
                } else {
                    a[k] = mid;
                }
            }
            (a, b)
        })
        .collect()
}

fn volume(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(l, h)| h - l).product()
}

/// Mass of `density` over the box: Gauss-Legendre on the box against the
/// sum over its 2^d halves, splitting where they disagree.
fn box_mass_rec(lo: &[f64], hi: &[f64], whole: f64, tol: f64, depth: u32, density: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let kids = children(lo, hi);
    let parts = kids
        .iter()
        .map(|(a, b)| Ok(volume(a, b) * box_average(a, b, density)?))
        .collect::<Result<Vec<f64>>>()?;
    let split: f64 = parts.iter().sum();
    if depth == 0 || (split - whole).abs() <= tol {
        return Ok(split);
    }
    let t = tol / kids.len() as f64;
    kids.iter().zip(parts).map(|((a, b), m)| box_mass_rec(a, b, m, t, depth - 1, density)).sum()
}

fn box_mass(lo: &[f64], hi: &[f64], density: &dyn Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let whole = volume(lo, hi) * box_average(lo, hi, density)?;
    // absolute floor: a relative target on an empty box never terminates early
    let tol = CUBATURE_REL * whole.abs() + 1e-12 * volume(lo, hi);
    box_mass_rec(lo, hi, whole, tol, CUBATURE_DEPTH, density)
}

/// Binned density check on a tensor grid. Along the last axis, adjacent
/// cells are merged until each holds at least `MIN_BIN_COUNT` points; a
/// row that never reaches it is reported unchecked.
pub fn local_density_check(points: &[Vec<f64>], edges: &[Vec<f64>], density: &dyn Fn(&[f64]) -> Result<f64>) -> Result<LocalCheck> {
    let d = edges.len();
    if d == 0 {
        return Err(Error::Grid("no bin axes".into()));
    }
    for e in edges {
        if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) || e.iter().any(|x| !x.is_finite()) {
            return Err(Error::Grid("bin edges must be finite and strictly increasing".into()));
        }
    }
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Grid(format!("point of dimension {} on a {d}-axis grid", p.len())));
    }
    let cells: Vec<usize> = edges.iter().map(|e| e.len() - 1).collect();
    let total: usize = cells.iter().product();
    let mut counts = vec![0u64; total];
    for p in points {
        let mut flat = 0usize;
        let mut inside = true;
        for k in 0..d {
            let e = &edges[k];
            if !(p[k] > e[0] && p[k] <= e[e.len() - 1]) {
                inside = false;
                break;
            }
            let i = e.partition_point(|&x| x < p[k]) - 1;
            flat = flat * cells[k] + i;
        }
        if inside {
            counts[flat] += 1;
        }
    }
    let n = points.len() as f64;
    let last = cells[d - 1];
    let rows = total / last;
    let mut bins = Vec::new();
    for r in 0..rows {
        // leading-axis indices of this row
        let mut lead = vec![0usize; d - 1];
        let mut rem = r;
        for k in (0..d - 1).rev() {
            lead[k] = rem % cells[k];
            rem /= cells[k];
        }
        let row = &counts[r * last..(r + 1) * last];
        let mut groups: Vec<(usize, usize, u64)> = Vec::new();
        let (mut start, mut acc) = (0usize, 0u64);
        for (j, &c) in row.iter().enumerate() {
            acc += c;
            if acc >= MIN_BIN_COUNT {
                groups.push((start, j + 1, acc));
                start = j + 1;
                acc = 0;
            }
        }
        if start < last {
            match groups.last_mut() {
                Some(g) => {
                    g.1 = last;
                    g.2 += acc;
                }
                None => groups.push((0, last, acc)),
            }
        }
        for (a, b, c) in groups {
            let mut lo: Vec<f64> = lead.iter().enumerate().map(|(k, &i)| edges[k][i]).collect();
            let mut hi: Vec<f64> = lead.iter().enumerate().map(|(k, &i)| edges[k][i + 1]).collect();
            let mut mass = 0.0;
            for j in a..b {
                lo.push(edges[d - 1][j]);
                hi.push(edges[d - 1][j + 1]);
                mass += box_mass(&lo, &hi, density)?;
                lo.pop();
                hi.pop();
            }
            lo.push(edges[d - 1][a]);
            hi.push(edges[d - 1][b]);
            let vol = volume(&lo, &hi);
            let centre: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
            let expected = n * mass;
            let ci = poisson_interval(c);
            let target = mass / vol;
            let scaled = c as f64 / (n * vol);
            let pass = (c >= MIN_BIN_COUNT).then(|| ci[0] <= expected && expected <= ci[1]);
            bins.push(LocalBin {
                center_target: density(&centre)?,
                lo,
                hi,
                count: c,
                expected,
                scaled,
                target,
                ci: [ci[0] / (n * vol), ci[1] / (n * vol)],
                rel_error: if target > 0.0 { scaled / target - 1.0 } else { f64::NAN },
                pass,
            });
        }
    }
    let checked: Vec<bool> = bins.iter().filter_map(|b| b.pass).collect();
    let (pass_fraction, status) = if checked.is_empty() {
        (None, LocalStatus::InsufficientData)
    } else {
        (Some(checked.iter().filter(|&&p| p).count() as f64 / checked.len() as f64), LocalStatus::Checked)
    };
    Ok(LocalCheck { n: points.len(), bins, pass_fraction, status })
}

/// Local check of (Z/a(u), τ/r(u)) against the joint density h_t(z) f(z).
pub fn local_check_vw(z: &[f64], t: &[f64], p: &LawParams, windows: &Windows, cells: usize) -> Result<LocalCheck> {
    windows.validate()?;
    if z.len() != t.len() {
        return Err(Error::Grid("z and t samples differ in length".into()));
    }
    let pts: Vec<Vec<f64>> = z.iter().zip(t).map(|(&a, &b)| vec![a, b]).collect();
    let edges = [uniform_edges(windows.z[0], windows.z[1], cells), uniform_edges(windows.t[0], windows.t[1], cells)];
    let tab = H1Table::cached(StableIndex::new(p.gamma_bar())?)?;
    local_density_check(&pts, &edges, &|c| fdd_theta_tabulated(p, &tab, &c[..1], &[1.0], c[1]))
}

/// Local check of snapshot vectors (z_1, .., z_k, t) against θ at times `ss`.
pub fn local_check_fdd(points: &[Vec<f64>], p: &LawParams, ss: &[f64], windows: &Windows, cells: usize) -> Result<LocalCheck> {
    windows.validate()?;
    let k = ss.len();
    let ze = uniform_edges(windows.z[0], windows.z[1], cells);
    let mut edges = vec![ze; k];
    edges.push(uniform_edges(windows.t[0], windows.t[1], cells));
    let tab = H1Table::cached(StableIndex::new(p.gamma_bar())?)?;
    local_density_check(points, &edges, &|c| fdd_theta_tabulated(p, &tab, &c[..k], ss, c[k]))
}

/// Limit of P(O/a ≤ x | Z/a = z): 1 - ((1+z)/(1+z+x))^β or 1 - e^{-x}.
pub fn conditional_overshoot_cdf(case: Case, beta: f64, z: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    match case {
        Case::I => {
            if !(beta > 0.0 && beta.is_finite()) || !(z >= 0.0) {
                return domain(format!("need beta > 0 and z >= 0, got beta {beta} z {z}"));
            }
            Ok(-(beta * ((1.0 + z) / (1.0 + z + x)).ln()).exp_m1())
        }
        Case::II => Ok(-(-x).exp_m1()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub z_lo: f64,
    pub z_hi: f64,
    pub n: usize,
    /// KS of the conditional probability transform against uniform.
    pub ks: f64,
    /// DKW bound for this stratum size, 95% jointly over the strata.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub a: usize,
    pub b: usize,
    pub ks: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalOvershootReport {
    pub case: Case,
    pub beta: Option<f64>,
    pub tolerance: f64,
    /// Samples with z <= 0, outside the support of the limit undershoot; not stratified.
    pub outside_support: usize,
    pub strata: Vec<StratumRow>,
    /// Two-sample comparisons between strata (Case II only).
    pub pairs: Vec<PairRow>,
    /// True when all samples formed one stratum.
    pub global: bool,
    pub pass: bool,
}

/// Smallest stratum size; fewer samples collapse to a single stratum.
pub const MIN_STRATUM: usize = 50;

/// O given Z, on equal-count Z-strata. Within a stratum the samples are
/// mapped through the conditional limit CDF at their own z and compared with
/// the uniform law. A stratum passes when its KS is within `tolerance` or
/// within its DKW bound, whichever is larger, so small strata are judged on
/// sampling noise and large ones on the tolerance. In
/// Case II the strata are also compared pairwise, against a Bonferroni 95%
/// two-sample bound.
pub fn conditional_overshoot_check(
    z: &[f64],
    o: &[f64],
    case: Case,
    beta: Option<f64>,
    strata: usize,
    tolerance: f64,
) -> Result<ConditionalOvershootReport> {
    if z.len() != o.len() || z.is_empty() {
        return domain("need equal-length nonempty z and o samples");
    }
    if strata == 0 || !(tolerance > 0.0) {
        return Err(Error::Config("need at least one stratum and a positive tolerance".into()));
    }
    let b = match (case, beta) {
        (Case::I, Some(b)) => b,
        (Case::I, None) => return Err(Error::Config("Case I check needs beta".into())),
        (Case::II, _) => f64::NAN,
    };
    let mut idx: Vec<usize> = (0..z.len()).filter(|&i| z[i] > 0.0).collect();
    let outside_support = z.len() - idx.len();
    if idx.is_empty() {
        return domain("no samples with z > 0");
    }
    idx.sort_by(|&i, &j| z[i].total_cmp(&z[j]).then(i.cmp(&j)));
    let k = strata.min(idx.len() / MIN_STRATUM).max(1);
    let mut rows = Vec::with_capacity(k);
    let mut groups: Vec<Vec<f64>> = Vec::with_capacity(k);
    for s in 0..k {
        let part = &idx[s * idx.len() / k..(s + 1) * idx.len() / k];
        let u: Vec<f64> = part.iter().map(|&i| conditional_overshoot_cdf(case, b, z[i], o[i])).collect::<Result<_>>()?;
        let ks = ks_distance(&u, |x| x.clamp(0.0, 1.0))?;
        rows.push(StratumRow {
            z_lo: z[part[0]],
            z_hi: z[part[part.len() - 1]],
            n: part.len(),
            ks,
            bound: dkw_bound(part.len(), 0.05 / k as f64),
            pass: ks <= tolerance.max(dkw_bound(part.len(), 0.05 / k as f64)),
        });
        groups.push(part.iter().map(|&i| o[i]).collect());
    }
    let mut pairs = Vec::new();
    if case == Case::II && k > 1 {
        let m = k * (k - 1) / 2;
        let c = ((2.0 * m as f64 / 0.05).ln() / 2.0).sqrt();
        for a in 0..k {
            for bb in a + 1..k {
                let (na, nb) = (groups[a].len() as f64, groups[bb].len() as f64);
                let ks = two_sample_ks(&groups[a], &groups[bb])?;
                let bound = c * ((na + nb) / (na * nb)).sqrt();
                pairs.push(PairRow { a, b: bb, ks, bound, pass: ks <= bound });
            }
        }
    }
    let pass = rows.iter().all(|r| r.pass) && pairs.iter().all(|p| p.pass);
    Ok(ConditionalOvershootReport { case, beta, tolerance, outside_support, strata: rows, pairs, global: k == 1, pass })
}

/// Limit laws a convergence table is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetLaws {
    pub case: Case,
    pub beta: Option<f64>,
    pub gamma: f64,
}

impl TargetLaws {
    pub fn for_model(model: &ModelSpec) -> Result<Self> {
        let r = model.classify()?;
        Ok(Self { case: r.case, beta: r.beta, gamma: r.gamma })
    }

    pub fn params(&self) -> Result<LawParams> {
        match (self.case, self.beta) {
            (Case::I, None) => Err(Error::Config("Case I laws need beta".into())),
            (Case::I, Some(b)) => LawParams::new(Case::I, b, self.gamma),
            (Case::II, _) => LawParams::new(Case::II, 1.0, self.gamma),
        }
    }

    /// CDFs of the overshoot, undershoot and passage-time limits.
    pub fn cdfs(&self) -> Result<[Box<dyn Fn(f64) -> Result<f64> + Send + Sync>; 3]> {
        let p = self.params()?;
        let w: Box<dyn Fn(f64) -> Result<f64> + Send + Sync> = if self.gamma == 0.0 {
            let (case, beta) = (p.case, p.beta);
            Box::new(move |t| passage_local_gamma0_cdf(case, beta, t))
        } else {
            let table = WCdfTable::cached(&p)?;
            Box::new(move |t| table.cdf(t))
        };
        Ok([Box::new(move |x| u_marginal_cdf(&p, x)), Box::new(move |z| v_marginal_cdf(&p, z)), w])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub overshoot: f64,
    pub undershoot: f64,
    pub passage: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { overshoot: 0.05, undershoot: 0.06, passage: 0.06 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub u: f64,
    pub a_u: f64,
    pub r_u: f64,
    pub overshoot: EcdfReport,
    pub undershoot: EcdfReport,
    pub passage: EcdfReport,
}

/// Whether each distance at the largest level is no larger than at the smallest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub overshoot: bool,
    pub undershoot: bool,
    pub passage: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub laws: TargetLaws,
    pub tolerances: Tolerances,
    pub rows: Vec<LevelRow>,
    pub trend: Option<Trend>,
    /// All distances at the largest level within tolerance.
    pub headline: bool,
}

/// Normalised distance table over levels. `runner` returns the conditional
/// samples at one level.
pub fn convergence_report(
    model: &ModelSpec,
    levels: &[f64],
    laws: &TargetLaws,
    tolerances: &Tolerances,
    mut runner: impl FnMut(f64) -> Result<Vec<FirstPassageSample>>,
) -> Result<ConvergenceReport> {
    if levels.is_empty() {
        return Err(Error::Config("need at least one level".into()));
    }
    let own = TargetLaws::for_model(model)?;
    let beta_ok = match (own.case, own.beta, laws.beta) {
        (Case::I, Some(a), Some(b)) => a == b,
        (Case::II, _, _) => true,
        _ => false,
    };
    if own.case != laws.case || own.gamma != laws.gamma || !beta_ok {
        return Err(Error::Config(format!("laws {laws:?} do not match the model regime {own:?}")));
    }
    let nb = NormingBundle::new(model)?;
    let [fo, fz, ft] = laws.cdfs()?;
    let mut rows = Vec::with_capacity(levels.len());
    for &u in levels {
        let s = runner(u)?;
        let (a, r) = (nb.a(u)?, nb.r(u)?);
        let col = |f: &dyn Fn(&FirstPassageSample) -> f64| s.iter().map(f).collect::<Vec<f64>>();
        rows.push(LevelRow {
            u,
            a_u: a,
            r_u: r,
            overshoot: ecdf_report(&col(&|x| x.o / a), &*fo, "U", "a(u)")?,
            undershoot: ecdf_report(&col(&|x| x.z / a), &*fz, "V", "a(u)")?,
            passage: ecdf_report(&col(&|x| x.tau / r), &*ft, "W", "r(u)")?,
        });
    }
    let trend = (rows.len() > 1).then(|| {
        let (f, l) = (&rows[0], &rows[rows.len() - 1]);
        Trend {
            overshoot: l.overshoot.ks <= f.overshoot.ks,
            undershoot: l.undershoot.ks <= f.undershoot.ks,
            passage: l.passage.ks <= f.passage.ks,
        }
    });
    let l = &rows[rows.len() - 1];
    let headline = l.overshoot.ks <= tolerances.overshoot && l.undershoot.ks <= tolerances.undershoot && l.passage.ks <= tolerances.passage;
    Ok(ConvergenceReport { laws: *laws, tolerances: *tolerances, rows, trend, headline })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_interval_brackets_count() {
        for k in [1u64, 5, 30, 100, 1000] {
            let [lo, hi] = poisson_interval(k);
            assert!(lo < k as f64 && hi > k as f64);
        }
        assert_eq!(poisson_interval(0)[0], 0.0);
        // exact 95% upper limit for k = 0 is -ln 0.025 = 3.689
        assert!((poisson_interval(0)[1] - 3.689).abs() < 0.05);
    }

    #[test]
    fn box_average_is_exact_for_quadratics() {
        let v = box_average(&[0.0, 1.0], &[2.0, 3.0], &|x| Ok(x[0] * x[0] + x[1])).unwrap();
        assert!((v - (4.0 / 3.0 + 2.0)).abs() < 1e-14);
    }
}

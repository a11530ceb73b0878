use std::path::Path;
use std::time::Instant;

use fluctuation::ladder::{
    check_killing_consistency, check_mean_identity, check_prop_q, check_vigon_all, estimate_ladder, IdentityRow,
    LadderConfig, LadderEstimate, RatioRow, VigonChecks,
};
use fluctuation::limit_laws::LimitLaw;
use fluctuation::simulate::{read_csv, sample_conditional, write_csv, AcceptanceReport, FirstPassageSample, SampleRequest};
use fluctuation::verify::{
    conditional_overshoot_check, convergence_report, local_check_fdd, local_check_vw, ConditionalOvershootReport,
    ConvergenceReport, LocalCheck, TargetLaws, Tolerances,
};
use fluctuation::{Error, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::out::{csv, OutDir};
use crate::CliError;

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Parse "(Y0), β=2" style selectors. Keys: β/beta/α/alpha, γ/gamma,
/// times (';'-separated). Defaults β=2, γ=1/2, times=1.
pub fn parse_selector(s: &str) -> Result<LimitLaw, CliError> {
    let mut parts = s.split(',');
    let label = parts.next().unwrap_or("").trim();
    let (mut beta, mut gamma, mut times) = (2.0, 0.5, vec![1.0]);
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| CliError::Usage(format!("selector term {p:?} is not key=value")))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {v:?} in selector")));
        match k.trim() {
            "β" | "beta" | "α" | "alpha" => beta = num(v)?,
            "γ" | "gamma" => gamma = num(v)?,
            "times" | "s" => times = v.split(';').map(num).collect::<Result<_, _>>()?,
            other => return Err(CliError::Usage(format!("unknown selector key {other:?}"))),
        }
    }
    LimitLaw::from_label(label, beta, gamma, &times).map_err(|e| CliError::Usage(e.to_string()))
}

/// File-name stem for a selector's law label.
pub fn file_label(s: &str) -> String {
    s.split(',').next().unwrap_or("").chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase()
}

pub fn limits(entries: &[(String, Vec<Vec<f64>>)], out: &OutDir) -> Result<(), CliError> {
    for (sel, axes) in entries {
        let law = parse_selector(sel)?;
        if axes.len() != law.dims() {
            return Err(CliError::Usage(format!(
                "{sel:?} needs {} axes ({}), got {}",
                law.dims(),
                law.columns().join(", "),
                axes.len()
            )));
        }
        let mut header = law.columns();
        header.push("density".into());
        let mut rows = Vec::new();
        let total: usize = axes.iter().map(Vec::len).product();
        for mut k in 0..total {
            let mut c = vec![0.0; axes.len()];
            for d in (0..axes.len()).rev() {
                c[d] = axes[d][k % axes[d].len()];
                k /= axes[d].len();
            }
            let v = law.evaluate(&c)?;
            c.push(v);
            rows.push(c);
        }
        let p = out.write(&format!("limits_{}.csv", file_label(sel)), csv(&header, rows).as_bytes())?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn level_file(run_id: &str, u: f64) -> String {
    format!("{run_id}_u{u}.csv")
}

fn need_model(cfg: &ExperimentConfig) -> Result<ModelSpec, CliError> {
    let m = cfg.model.ok_or_else(|| CliError::Usage("config has no [model] section".into()))?;
    if cfg.levels.is_empty() {
        return Err(CliError::Usage("config lists no levels".into()));
    }
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct LevelManifest {
    u: f64,
    file: String,
    acceptance: AcceptanceReport,
    seconds: f64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    run_id: String,
    config_hash: String,
    workers: usize,
    levels: Vec<LevelManifest>,
    wall_clock_seconds: f64,
    pass: bool,
}

/// Returns false when some level fell short of the requested count.
pub fn simulate(cfg: &ExperimentConfig, out: &OutDir) -> Result<bool, CliError> {
    let m = need_model(cfg)?;
    if cfg.samples == 0 {
        return Err(CliError::Usage("samples must be at least 1".into()));
    }
    let start = Instant::now();
    let mut levels = Vec::new();
    for &u in &cfg.levels {
        let t0 = Instant::now();
        let req = SampleRequest {
            n: cfg.samples,
            seed: cfg.seed,
            workers: cfg.workers,
            method: cfg.method,
            fractions: cfg.fractions.clone(),
            budget: cfg.budget,
            max_attempts: cfg.max_attempts,
        };
        let s = sample_conditional(&m, u, &req)?;
        let mut bytes = Vec::new();
        write_csv(&s.samples, cfg.fractions.len(), &mut bytes).map_err(|e| CliError::Usage(e.to_string()))?;
        let file = level_file(&cfg.run_id, u);
        out.write(&file, &bytes)?;
        eprintln!("u = {u}: {} samples, acceptance rate {:.4}", s.samples.len(), s.report.acceptance_rate);
        levels.push(LevelManifest { u, file, acceptance: s.report, seconds: t0.elapsed().as_secs_f64() });
    }
    let pass = levels.iter().all(|l| !l.acceptance.shortfall);
    let manifest = Manifest {
        run_id: cfg.run_id.clone(),
        config_hash: cfg.hash(),
        workers: cfg.workers,
        levels,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        pass,
    };
    out.write_json(&format!("{}_manifest.json", cfg.run_id), &manifest)?;
    Ok(pass)
}

#[derive(Serialize)]
struct Criterion {
    name: String,
    pass: bool,
    detail: String,
}

fn criterion(name: &str, pass: bool, detail: String) -> Criterion {
    Criterion { name: name.into(), pass, detail }
}

#[derive(Serialize)]
struct VerifyMetadata {
    tolerances: Tolerances,
    default_tolerances: Tolerances,
    /// Tolerances that differ from the defaults.
    overrides: Vec<String>,
    conditional_tolerance: f64,
    local_pass: f64,
    fdd_pass: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    run_id: String,
    config_hash: String,
    pass: bool,
    criteria: Vec<Criterion>,
    metadata: VerifyMetadata,
    convergence: ConvergenceReport,
    conditional: ConditionalOvershootReport,
    local: Option<LocalCheck>,
    fdd: Option<LocalCheck>,
}

fn load_level(dir: &Path, run_id: &str, u: f64) -> Result<Vec<FirstPassageSample>, CliError> {
    let p = dir.join(level_file(run_id, u));
    let text = std::fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("cannot read samples {}: {e}", p.display())))?;
    Ok(read_csv(&text)?)
}

pub fn verify(cfg: &ExperimentConfig, samples: &Path, out: &OutDir) -> Result<bool, CliError> {
    let m = need_model(cfg)?;
    if !samples.is_dir() {
        return Err(CliError::Usage(format!("samples directory {} does not exist", samples.display())));
    }
    let v = &cfg.verify;
    let laws = TargetLaws::for_model(&m)?;
    let conv = convergence_report(&m, &cfg.levels, &laws, &v.tolerances, |u| {
        load_level(samples, &cfg.run_id, u).map_err(|e| Error::Config(e.to_string()))
    })?;
    let top = conv.rows.last().expect("levels are nonempty");
    let mut criteria = vec![criterion(
        "distances",
        conv.headline,
        format!(
            "u = {}: KS overshoot {:.4}, undershoot {:.4}, passage {:.4}",
            top.u, top.overshoot.ks, top.undershoot.ks, top.passage.ks
        ),
    )];
    if let Some(t) = conv.trend {
        criteria.push(criterion(
            "trend",
            t.overshoot && t.undershoot && t.passage,
            format!("distances shrink from the smallest to the largest level: {t:?}"),
        ));
    }
    let s = load_level(samples, &cfg.run_id, top.u)?;
    let (a, r) = (top.a_u, top.r_u);
    let z: Vec<f64> = s.iter().map(|x| x.z / a).collect();
    let o: Vec<f64> = s.iter().map(|x| x.o / a).collect();
    let t: Vec<f64> = s.iter().map(|x| x.tau / r).collect();
    let cond = conditional_overshoot_check(&z, &o, laws.case, laws.beta, v.strata, v.conditional_tolerance)?;
    criteria.push(criterion(
        "conditional_overshoot",
        cond.pass,
        format!("{} strata, {} samples with Z <= 0 set aside", cond.strata.len(), cond.outside_support),
    ));
    let (mut local, mut fdd) = (None, None);
    if laws.gamma > 0.0 {
        let p = laws.params()?;
        let l = local_check_vw(&z, &t, &p, &v.windows, v.local_cells)?;
        let f = l.pass_fraction.unwrap_or(0.0);
        criteria.push(criterion("local_density", f >= v.local_pass, format!("{:.1}% of {} bins", 100.0 * f, l.checked())));
        local = Some(l);
        if let Some(k) = cfg.fractions.iter().position(|&f| f == v.fdd_fraction) {
            let pts: Vec<Vec<f64>> = s.iter().map(|x| vec![x.snapshots[k].1 / a, x.z / a, x.tau / r]).collect();
            let l = local_check_fdd(&pts, &p, &[v.fdd_fraction, 1.0], &v.windows, v.fdd_cells)?;
            let f = l.pass_fraction.unwrap_or(0.0);
            criteria.push(criterion("fdd_two_time", f >= v.fdd_pass, format!("{:.1}% of {} bins", 100.0 * f, l.checked())));
            fdd = Some(l);
        }
    }
    let pass = criteria.iter().all(|c| c.pass);
    let d = Tolerances::default();
    let overrides = [
        ("overshoot", v.tolerances.overshoot, d.overshoot),
        ("undershoot", v.tolerances.undershoot, d.undershoot),
        ("passage", v.tolerances.passage, d.passage),
    ]
    .iter()
    .filter(|(_, a, b)| a != b)
    .map(|(n, _, _)| n.to_string())
    .collect();
    let distances = csv(
        &["u", "a_u", "r_u", "ks_overshoot", "ks_undershoot", "ks_passage", "w1_overshoot", "w1_undershoot", "w1_passage"]
            .map(String::from),
        conv.rows.iter().map(|row| {
            let w = |e: &fluctuation::verify::EcdfReport| e.wasserstein.unwrap_or(f64::NAN);
            vec![
                row.u,
                row.a_u,
                row.r_u,
                row.overshoot.ks,
                row.undershoot.ks,
                row.passage.ks,
                w(&row.overshoot),
                w(&row.undershoot),
                w(&row.passage),
            ]
        }),
    );
    out.write(&format!("{}_distances.csv", cfg.run_id), distances.as_bytes())?;
    let mut overlay = String::from("u,quantity,p,empirical,target_cdf\n");
    for row in &conv.rows {
        for (name, e) in [("overshoot", &row.overshoot), ("undershoot", &row.undershoot), ("passage", &row.passage)] {
            for q in &e.quantiles {
                overlay.push_str(&format!("{},{name},{},{},{}\n", row.u, q.p, q.empirical, q.target_cdf));
            }
        }
    }
    out.write(&format!("{}_overlay.csv", cfg.run_id), overlay.as_bytes())?;
    let report = VerifyReport {
        run_id: cfg.run_id.clone(),
        config_hash: cfg.hash(),
        pass,
        criteria,
        metadata: VerifyMetadata {
            tolerances: v.tolerances,
            default_tolerances: d,
            overrides,
            conditional_tolerance: v.conditional_tolerance,
            local_pass: v.local_pass,
            fdd_pass: v.fdd_pass,
        },
        convergence: conv,
        conditional: cond,
        local,
        fdd,
    };
    for c in &report.criteria {
        eprintln!("{:<22} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    out.write_json(&format!("{}_verify.json", cfg.run_id), &report)?;
    Ok(pass)
}

#[derive(Serialize)]
struct Identities {
    /// One simultaneous band over all levels of the three identities.
    vigon: VigonChecks,
    killing: IdentityRow,
    mean: Option<IdentityRow>,
}

#[derive(Serialize)]
struct LadderReport {
    run_id: String,
    config_hash: String,
    pass: bool,
    criteria: Vec<Criterion>,
    estimate: LadderEstimate,
    identities: Identities,
    ratio: Vec<RatioRow>,
}

pub fn ladder(cfg: &ExperimentConfig, out: &OutDir) -> Result<bool, CliError> {
    let l = cfg.ladder.as_ref().ok_or_else(|| CliError::Usage("config has no [ladder] section".into()))?;
    let mut lc = LadderConfig::new(l.paths, cfg.seed);
    lc.horizon = l.horizon;
    lc.depth = l.depth;
    lc.batches = l.batches;
    lc.workers = cfg.workers;
    lc.grid = l.grid;
    let e = estimate_ladder(&l.walk, &lc)?;
    let ids = Identities {
        vigon: check_vigon_all(&e, &l.levels)?,
        killing: check_killing_consistency(&e),
        mean: match check_mean_identity(&e) {
            Ok(r) => Some(r),
            Err(Error::Domain(_)) => None,
            Err(err) => return Err(err.into()),
        },
    };
    let xs = if l.ratio_at.is_empty() { vec![*e.grid.last().expect("nonempty grid")] } else { l.ratio_at.clone() };
    let ratio = check_prop_q(&e, &xs)?;
    let all = |rows: &[IdentityRow]| (rows.iter().filter(|r| r.pass).count(), rows.len());
    let mut criteria = Vec::new();
    for (name, rows) in [("inverse", &ids.vigon.inverse), ("positive", &ids.vigon.positive), ("negative", &ids.vigon.negative)] {
        let (k, n) = all(rows);
        criteria.push(criterion(name, k == n, format!("{k}/{n} levels within the band")));
    }
    criteria.push(criterion(
        "killing",
        ids.killing.pass,
        format!("exp(-q) {:.5} vs {:.5}", ids.killing.lhs, ids.killing.rhs),
    ));
    if let Some(m) = &ids.mean {
        criteria.push(criterion("mean", m.pass, format!("|E S1| {:.5} vs q E H* {:.5}", m.lhs, m.rhs)));
    }
    if l.walk.mean() == f64::NEG_INFINITY {
        let last = ratio.last().expect("nonempty ratio points");
        let rel = last.ratio.map_or(f64::INFINITY, |v| v / last.q_hat - 1.0);
        criteria.push(criterion(
            "ratio",
            rel.abs() <= l.ratio_tolerance,
            format!("ratio at x = {} differs from q by {:.2}%", last.x, 100.0 * rel),
        ));
    }
    criteria.push(criterion(
        "horizon",
        e.horizon_ok(),
        format!("late maxima {:.2e}, horizon stops {:.2e}", e.late_max_fraction, e.horizon_stop_fraction),
    ));
    let pass = criteria.iter().all(|c| c.pass);
    let mut grid = String::from("quantity,x,value,se\n");
    for (name, vals) in
        [("pi_h_tail", &e.pi_h_tail), ("pi_hstar_tail", &e.pi_hstar_tail), ("gstar", &e.gstar), ("a_hstar", &e.a_hstar)]
    {
        for g in vals.iter() {
            grid.push_str(&format!("{name},{},{},{}\n", g.x, g.value, g.se));
        }
    }
    out.write(&format!("{}_ladder_grid.csv", cfg.run_id), grid.as_bytes())?;
    for c in &criteria {
        eprintln!("{:<10} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    let report = LadderReport { run_id: cfg.run_id.clone(), config_hash: cfg.hash(), pass, criteria, estimate: e, identities: ids, ratio };
    out.write_json(&format!("{}_ladder.json", cfg.run_id), &report)?;
    Ok(pass)
}

#[derive(Serialize)]
struct Section {
    file: String,
    pass: bool,
}

#[derive(Serialize)]
struct Summary {
    run_id: String,
    config_hash: String,
    pass: bool,
    sections: Vec<Section>,
}

/// Collects the pass flags of whatever reports exist for the run.
pub fn report(cfg: &ExperimentConfig, out: &OutDir) -> Result<bool, CliError> {
    let mut sections = Vec::new();
    for kind in ["manifest", "verify", "ladder"] {
        let file = format!("{}_{kind}.json", cfg.run_id);
        let p = out.path().join(&file);
        let Ok(text) = std::fs::read_to_string(&p) else { continue };
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("cannot parse {}: {e}", p.display())))?;
        let pass = v.get("pass").and_then(serde_json::Value::as_bool).unwrap_or(false);
        sections.push(Section { file, pass });
    }
    if sections.is_empty() {
        return Err(CliError::Usage(format!("no reports for run {:?} in {}", cfg.run_id, out.path().display())));
    }
    let pass = sections.iter().all(|s| s.pass);
    for s in &sections {
        eprintln!("{:<32} {}", s.file, if s.pass { "PASS" } else { "FAIL" });
    }
    let summary = Summary { run_id: cfg.run_id.clone(), config_hash: cfg.hash(), pass, sections };
    out.write_json(&format!("{}_report.json", cfg.run_id), &summary)?;
    Ok(pass)
}

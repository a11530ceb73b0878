//! Experiment configuration (TOML).

use std::collections::BTreeSet;
use std::path::PathBuf;

use fluctuation::ladder::{GridSpec, WalkSpec};
use fluctuation::simulate::{Method, SimBudget, DEFAULT_FRACTIONS};
use fluctuation::verify::{Tolerances, Windows};
use fluctuation::ModelSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

fn one() -> usize {
    1
}

fn default_fractions() -> Vec<f64> {
    DEFAULT_FRACTIONS.to_vec()
}

fn default_max_attempts() -> u64 {
    10_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<f64>,
    /// Conditional samples per level.
    #[serde(default)]
    pub samples: usize,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub budget: SimBudget,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub limits: Vec<LimitsEntry>,
}

fn default_method() -> Method {
    Method::Auto
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub tolerances: Tolerances,
    pub windows: Windows,
    /// Cells per axis of the (V, W) local check.
    pub local_cells: usize,
    pub local_pass: f64,
    /// Snapshot fraction used with s = 1 in the two-time check.
    pub fdd_fraction: f64,
    pub fdd_cells: usize,
    pub fdd_pass: f64,
    pub strata: usize,
    pub conditional_tolerance: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            windows: Windows::default(),
            local_cells: 8,
            local_pass: 0.90,
            fdd_fraction: 0.5,
            fdd_cells: 5,
            fdd_pass: 0.85,
            strata: 5,
            conditional_tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    pub walk: WalkSpec,
    pub paths: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_depth")]
    pub depth: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default)]
    pub grid: GridSpec,
    /// Levels for the three identity checks.
    #[serde(default = "default_ladder_levels")]
    pub levels: Vec<f64>,
    /// Points for the truncated-mean ratio; the largest grid point if empty.
    #[serde(default)]
    pub ratio_at: Vec<f64>,
    #[serde(default = "default_ratio_tolerance")]
    pub ratio_tolerance: f64,
}

fn default_horizon() -> u64 {
    100_000
}
fn default_depth() -> f64 {
    200.0
}
fn default_batches() -> usize {
    50
}
fn default_ladder_levels() -> Vec<f64> {
    (0..9).map(|i| 1.0 + 0.5 * i as f64).collect()
}
fn default_ratio_tolerance() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsEntry {
    /// Selector such as "(Y0), β=2".
    pub law: String,
    /// One list of values per coordinate; the grid is their product.
    pub axes: Vec<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical text with `workers` and `out` cleared,
    /// since neither changes any result.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 1;
        c.out = None;
        hex::encode(Sha256::digest(c.canonical().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.run_id.is_empty() || !self.run_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return bad(format!("run_id must be nonempty ASCII letters, digits, '-' or '_', got {:?}", self.run_id));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if let Some(m) = &self.model {
            m.classify().map_err(|e| CliError::Usage(format!("model: {e}")))?;
        }
        if self.levels.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
            return bad(format!("levels must be positive and finite: {:?}", self.levels));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return bad("levels must be strictly increasing".into());
        }
        if self.fractions.iter().any(|s| !(*s > 0.0 && *s < 1.0)) || self.fractions.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("fractions must increase within (0, 1): {:?}", self.fractions));
        }
        self.budget.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let v = &self.verify;
        for (name, t) in [
            ("overshoot", v.tolerances.overshoot),
            ("undershoot", v.tolerances.undershoot),
            ("passage", v.tolerances.passage),
            ("conditional_tolerance", v.conditional_tolerance),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("tolerance {name} must lie in (0, 1], got {t}"));
            }
        }
        if !(v.local_pass >= 0.0 && v.local_pass <= 1.0 && v.fdd_pass >= 0.0 && v.fdd_pass <= 1.0) {
            return bad("pass fractions must lie in [0, 1]".into());
        }
        if v.local_cells == 0 || v.fdd_cells == 0 || v.strata == 0 {
            return bad("cell and stratum counts must be positive".into());
        }
        v.windows.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some(l) = &self.ladder {
            l.walk.validate().map_err(|e| CliError::Usage(format!("ladder walk: {e}")))?;
            if l.levels.iter().any(|u| !(*u >= l.grid.lo && *u <= l.grid.hi)) {
                return bad(format!("ladder levels must lie in the grid [{}, {}]", l.grid.lo, l.grid.hi));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.limits {
            crate::commands::parse_selector(&e.law)?;
            if !seen.insert(crate::commands::file_label(&e.law)) {
                return bad(format!("duplicate limits law {:?}", e.law));
            }
        }
        Ok(())
    }
}

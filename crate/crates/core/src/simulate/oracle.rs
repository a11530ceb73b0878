//! Brute-force fine-grid oracle for the drift model on shared randomness.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, NegativeComponent};

use super::direct::{run, Limits};
use super::noise::Scripted;
use super::{Outcome, SimBudget};

/// Positive jump epochs and sizes on [0, horizon].
#[derive(Clone, Debug, PartialEq)]
pub struct SharedPath {
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
    pub horizon: f64,
}

impl SharedPath {
    pub fn generate<R: Rng + ?Sized>(model: &ModelSpec, horizon: f64, rng: &mut R) -> Self {
        let (mut times, mut sizes) = (Vec::new(), Vec::new());
        let mut t = 0.0;
        loop {
            let g: f64 = Exp1.sample(rng);
            t += g / model.rate;
            if t > horizon {
                break;
            }
            times.push(t);
            sizes.push(model.positive.sample(rng));
        }
        Self { times, sizes, horizon }
    }
}

fn drift_of(model: &ModelSpec) -> Result<f64> {
    match model.negative {
        NegativeComponent::Drift { rate } => Ok(rate),
        _ => Err(Error::Domain("grid oracle covers the drift model only".into())),
    }
}

/// Passage of the event simulator on the shared path.
pub fn event_passage(model: &ModelSpec, path: &SharedPath, u: f64) -> Result<bool> {
    drift_of(model)?;
    let mut gaps = Vec::with_capacity(path.times.len());
    let mut prev = 0.0;
    for &t in &path.times {
        gaps.push(t - prev);
        prev = t;
    }
    let mut noise = Scripted::new(&gaps, &path.sizes);
    let budget = SimBudget { t_cap: f64::MAX, depth_cap: f64::MAX, max_events: u64::MAX };
    let lim = Limits { time: f64::INFINITY, depth: f64::INFINITY };
    Ok(matches!(run(model, u, &mut noise, &budget, &lim, &[])?, Outcome::Passage(_)))
}

/// Passage seen by evaluating X on the grid k·dt up to the horizon. X only
/// decreases between jumps, so the grid maximum after each jump sits at the
/// first grid point at or after it; only those points are evaluated.
pub fn grid_passage(model: &ModelSpec, path: &SharedPath, u: f64, dt: f64) -> Result<bool> {
    let c = drift_of(model)?;
    let last = (path.horizon / dt).floor();
    let mut cp = 0.0;
    let mut j = 0usize;
    while j < path.times.len() {
        let k = (path.times[j] / dt).ceil();
        if k > last {
            break;
        }
        let t = (k * dt).max(path.times[j]);
        while j < path.times.len() && path.times[j] <= t {
            cp += path.sizes[j];
            j += 1;
        }
        if cp - c * t > u {
            return Ok(true);
        }
    }
    Ok(false)
}

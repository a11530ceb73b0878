//! Event-driven simulation of one path up to first passage.
//!
//! The negative component never increases the path, so passage above u can
//! only happen at a positive jump epoch. The simulator steps from event to
//! event and tests only there.

use crate::error::Result;
use crate::model::{ModelSpec, NegativeComponent};
use crate::stable_law::StableIndex;

use super::noise::PathNoise;
use super::{FirstPassageSample, NoPassage, Outcome, SimBudget, StopReason};

/// What is needed to rebuild X at intermediate times after passage.
#[derive(Clone, Debug, Default)]
pub(crate) struct PathRecord {
    /// (time, size) of positive jumps.
    pub positive: Vec<(f64, f64)>,
    /// (time, size) of negative compound Poisson jumps.
    pub negative: Vec<(f64, f64)>,
    /// (time, D) for the stable component at event epochs, starting at (0, 0).
    pub stable: Vec<(f64, f64)>,
}

pub(crate) struct Limits {
    pub time: f64,
    pub depth: f64,
}

pub(crate) fn run<N: PathNoise + ?Sized>(
    model: &ModelSpec,
    u: f64,
    noise: &mut N,
    budget: &SimBudget,
    lim: &Limits,
    fractions: &[f64],
) -> Result<Outcome> {
    let lam_p = model.rate;
    let (lam_n, neg_law) = match model.negative {
        NegativeComponent::CompoundPoisson { jumps, rate } => (rate, Some(jumps)),
        _ => (0.0, None),
    };
    let stable = match model.negative {
        NegativeComponent::StableSubordinator { index, scale } => Some((StableIndex::new(index)?, scale)),
        _ => None,
    };
    let p_pos = lam_p / (lam_p + lam_n);
    let mut rec = PathRecord::default();
    if stable.is_some() {
        rec.stable.push((0.0, 0.0));
    }
    let (mut t, mut x, mut inf, mut d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut events = 0u64;
    loop {
        let g = noise.gap(lam_p + lam_n);
        if !g.is_finite() {
            return Ok(Outcome::NoPassage(NoPassage { elapsed: t, position: x, infimum: inf, events, reason: StopReason::StreamEnd }));
        }
        match model.negative {
            NegativeComponent::Drift { rate } => x -= rate * g,
            NegativeComponent::StableSubordinator { .. } => {
                let (idx, scale) = stable.expect("stable index");
                let inc = noise.stable_increment(idx, scale * g);
                d += inc;
                x -= inc;
            }
            NegativeComponent::CompoundPoisson { .. } => {}
        }
        t += g;
        events += 1;
        if stable.is_some() {
            rec.stable.push((t, d));
        }
        inf = inf.min(x);
        if lam_n == 0.0 || noise.mark(p_pos) {
            let j = noise.positive_jump(&model.positive);
            let pre = x;
            x += j;
            rec.positive.push((t, j));
            if x > u {
                let snapshots = snapshots(model, &rec, stable.map(|s| s.0), t, -pre, fractions, noise)?;
                return Ok(Outcome::Passage(FirstPassageSample {
                    replicate: 0,
                    u,
                    tau: t,
                    z: -pre,
                    o: x - u,
                    snapshots,
                    attempts: 1,
                }));
            }
        } else {
            let j = noise.negative_jump(neg_law.as_ref().expect("negative law"));
            x -= j;
            rec.negative.push((t, j));
            inf = inf.min(x);
        }
        if t > lim.time && x < -lim.depth {
            return Ok(Outcome::NoPassage(NoPassage { elapsed: t, position: x, infimum: inf, events, reason: StopReason::Budget }));
        }
        if events >= budget.max_events {
            return Ok(Outcome::NoPassage(NoPassage { elapsed: t, position: x, infimum: inf, events, reason: StopReason::EventCap }));
        }
    }
}

/// X*(s τ) = -X(s τ) at each fraction; s = 1 gives the left limit Z.
fn snapshots<N: PathNoise + ?Sized>(
    model: &ModelSpec,
    rec: &PathRecord,
    idx: Option<StableIndex>,
    tau: f64,
    z: f64,
    fractions: &[f64],
    noise: &mut N,
) -> Result<Vec<(f64, f64)>> {
    let mut known = rec.stable.clone();
    let mut out = Vec::with_capacity(fractions.len());
    for &s in fractions {
        if s >= 1.0 {
            out.push((s, z));
            continue;
        }
        let ts = s * tau;
        let cp: f64 = rec.positive.iter().take_while(|p| p.0 <= ts).map(|p| p.1).sum();
        let down = match model.negative {
            NegativeComponent::Drift { rate } => rate * ts,
            NegativeComponent::CompoundPoisson { .. } => rec.negative.iter().take_while(|p| p.0 <= ts).map(|p| p.1).sum(),
            NegativeComponent::StableSubordinator { scale, .. } => {
                stable_at(idx.expect("stable index"), scale, &mut known, ts, noise)?
            }
        };
        out.push((s, down - cp));
    }
    Ok(out)
}

/// D at real time `ts`, inserting a bridge draw between the nearest known
/// points. `known` is sorted by time.
pub(crate) fn stable_at<N: PathNoise + ?Sized>(
    idx: StableIndex,
    scale: f64,
    known: &mut Vec<(f64, f64)>,
    ts: f64,
    noise: &mut N,
) -> Result<f64> {
    let i = known.partition_point(|p| p.0 < ts);
    if i < known.len() && known[i].0 == ts {
        return Ok(known[i].1);
    }
    let (t0, d0) = known[i - 1];
    let (t1, d1) = known[i];
    let total = d1 - d0;
    let v = if total > 0.0 {
        d0 + noise.bridge_point(idx, scale * (ts - t0), scale * (t1 - ts), total)?
    } else {
        d0
    };
    known.insert(i, (ts, v));
    Ok(v)
}

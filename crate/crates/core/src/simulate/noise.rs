//! Sources of randomness for the path simulator.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::Result;
use crate::model::JumpFamily;
use crate::stable_law::{sample_bridge_point, stable_increment, StableIndex};

/// Private RNG stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// The draws the direct simulator needs.
pub trait PathNoise {
    /// Exponential waiting time with the given rate.
    fn gap(&mut self, rate: f64) -> f64;
    fn positive_jump(&mut self, law: &JumpFamily) -> f64;
    fn negative_jump(&mut self, law: &JumpFamily) -> f64;
    /// True with probability `p`.
    fn mark(&mut self, p: f64) -> bool;
    fn stable_increment(&mut self, idx: StableIndex, dt: f64) -> f64;
    /// D_a given D_a + D'_b = total.
    fn bridge_point(&mut self, idx: StableIndex, a: f64, b: f64, total: f64) -> Result<f64>;
}

pub struct RngNoise<R>(pub R);

impl<R: Rng> PathNoise for RngNoise<R> {
    fn gap(&mut self, rate: f64) -> f64 {
        let e: f64 = Exp1.sample(&mut self.0);
        e / rate
    }

    fn positive_jump(&mut self, law: &JumpFamily) -> f64 {
        law.sample(&mut self.0)
    }

    fn negative_jump(&mut self, law: &JumpFamily) -> f64 {
        law.sample(&mut self.0)
    }

    fn mark(&mut self, p: f64) -> bool {
        self.0.random::<f64>() < p
    }

    fn stable_increment(&mut self, idx: StableIndex, dt: f64) -> f64 {
        stable_increment(idx, dt, &mut self.0)
    }

    fn bridge_point(&mut self, idx: StableIndex, a: f64, b: f64, total: f64) -> Result<f64> {
        sample_bridge_point(idx, a, b, total, &mut self.0)
    }
}

/// Replays fixed draws. An exhausted gap stream yields +inf, which ends the
/// path; other exhausted streams panic.
#[derive(Clone, Debug, Default)]
pub struct Scripted {
    pub gaps: VecDeque<f64>,
    pub positive: VecDeque<f64>,
    pub negative: VecDeque<f64>,
    pub marks: VecDeque<bool>,
    pub stable: VecDeque<f64>,
    pub bridge_fractions: VecDeque<f64>,
}

impl Scripted {
    pub fn new(gaps: &[f64], positive: &[f64]) -> Self {
        Self { gaps: gaps.iter().copied().collect(), positive: positive.iter().copied().collect(), ..Self::default() }
    }
}

impl PathNoise for Scripted {
    fn gap(&mut self, _rate: f64) -> f64 {
        self.gaps.pop_front().unwrap_or(f64::INFINITY)
    }

    fn positive_jump(&mut self, _law: &JumpFamily) -> f64 {
        self.positive.pop_front().expect("scripted positive jumps exhausted")
    }

    fn negative_jump(&mut self, _law: &JumpFamily) -> f64 {
        self.negative.pop_front().expect("scripted negative jumps exhausted")
    }

    fn mark(&mut self, _p: f64) -> bool {
        self.marks.pop_front().expect("scripted marks exhausted")
    }

    fn stable_increment(&mut self, _idx: StableIndex, _dt: f64) -> f64 {
        self.stable.pop_front().expect("scripted stable increments exhausted")
    }

    fn bridge_point(&mut self, _idx: StableIndex, _a: f64, _b: f64, total: f64) -> Result<f64> {
        Ok(total * self.bridge_fractions.pop_front().unwrap_or(0.5))
    }
}

//! Passage-time fluctuation toolkit for heavy-tailed Lévy processes that
//! drift to -inf: model tails, norming functions, one-sided stable densities,
//! limit laws, exact conditional first-passage samplers, ladder-height
//! estimation and statistical verification.

pub mod error;
pub mod special;
pub mod quad;
pub mod model;
pub mod norming;
pub mod stable_law;
pub mod limit_laws;
pub mod simulate;
pub mod ladder;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Case, JumpFamily, MeanClass, ModelSpec, NegativeComponent, RegimeTag, Triplet};

//! Multi-level learning (ML²) for stochastic bandits with heteroscedastic noise.
//!
//! Observations are packed into levels by the magnitude of their revealed
//! variance bound so that each level is homoscedastic up to a factor of two.
//! A pluggable regression subroutine maintains one confidence set per level,
//! and actions are chosen optimistically against all levels at once.
//!
//! Two subroutines are provided:
//!
//! - [`erm`]: least-squares ERM over an explicit finite function class with
//!   enumerated confidence sets.
//! - [`glm`]: per-level FTRL learners converted into ellipsoidal confidence
//!   sets for generalized linear rewards.
//!
//! [`eluder`] holds the combinatorial tools (ε-dependence, eluder dimension,
//! width, covering numbers) used to instantiate the confidence radii.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eluder;
pub mod erm;
mod error;
pub mod glm;
pub mod levels;
pub mod ml2;
pub mod noise;
pub mod trace;

pub use error::{Error, Result};
pub use levels::{assign_level, num_levels, LevelPartition};
pub use ml2::{run_episode, select_action_ofu, ConfidenceSubroutine, Environment, Ml2Config};
pub use noise::{sample_noise, NoiseKind, NoiseSpec};
pub use trace::{minimum_gap, RoundRecord, RunTrace};

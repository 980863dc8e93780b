//! Level arithmetic: how many variance levels exist and which level a round
//! falls into.
//!
//! Levels are indexed `0..L`. A round with variance bound `σ_t` is placed at
//! level `l` with `2^l σ̄ ≤ max(σ̄, σ_t) ≤ 2^(l+1) σ̄`, ties at an exact power
//! of two going to the lower level and the top level absorbing everything
//! above `2^(L-1) σ̄`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const LOG2_REL_TOL: f64 = 1e-12;

/// `log2(x)` snapped to the nearest integer when `x` is within a relative
/// `1e-12` of that power of two.
fn snapped_log2(x: f64) -> (f64, bool) {
    let k = x.log2();
    let nearest = k.round();
    let exact = ((x - nearest.exp2()) / x).abs() <= LOG2_REL_TOL;
    (if exact { nearest } else { k }, exact)
}

pub(crate) fn floor_log2(x: f64) -> i64 {
    let (k, exact) = snapped_log2(x);
    if exact {
        k as i64
    } else {
        k.floor() as i64
    }
}

pub(crate) fn ceil_log2(x: f64) -> i64 {
    let (k, exact) = snapped_log2(x);
    if exact {
        k as i64
    } else {
        k.ceil() as i64
    }
}

/// Number of levels `max(1, ⌈log₂(R/σ̄)⌉)`.
pub fn num_levels(noise_bound: f64, sigma_bar: f64) -> Result<usize> {
    if !(noise_bound > 0.0 && noise_bound.is_finite()) {
        return Err(invalid(format!("R must be positive and finite, got {noise_bound}")));
    }
    if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
        return Err(invalid(format!("sigma_bar must be positive and finite, got {sigma_bar}")));
    }
    Ok(ceil_log2(noise_bound / sigma_bar).max(1) as usize)
}

/// Level of a round with variance bound `sigma`, clamped to `0..num_levels`.
pub fn assign_level(sigma: f64, sigma_bar: f64, num_levels: usize) -> Result<usize> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(invalid(format!("sigma_t must be finite and non-negative, got {sigma}")));
    }
    if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
        return Err(invalid(format!("sigma_bar must be positive and finite, got {sigma_bar}")));
    }
    if num_levels == 0 {
        return Err(invalid("at least one level is required"));
    }
    let effective = sigma.max(sigma_bar);
    let level = floor_log2(effective / sigma_bar).clamp(0, num_levels as i64 - 1);
    Ok(level as usize)
}

/// Per-level round index sets `Ψ_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPartition {
    sigma_bar: f64,
    sets: Vec<Vec<usize>>,
}

impl LevelPartition {
    pub fn new(sigma_bar: f64, num_levels: usize) -> Result<Self> {
        if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
            return Err(invalid(format!("sigma_bar must be positive and finite, got {sigma_bar}")));
        }
        if num_levels == 0 {
            return Err(invalid("at least one level is required"));
        }
        Ok(Self {
            sigma_bar,
            sets: vec![Vec::new(); num_levels],
        })
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    pub fn num_levels(&self) -> usize {
        self.sets.len()
    }

    /// Routes round `t` to its level and returns that level.
    ///
    /// Rounds must be added in strictly increasing order.
    pub fn assign(&mut self, t: usize, sigma: f64) -> Result<usize> {
        if let Some(last) = self.last_round() {
            if t <= last {
                return Err(invalid(format!("round {t} is not after round {last}")));
            }
        }
        let level = assign_level(sigma, self.sigma_bar, self.sets.len())?;
        self.sets[level].push(t);
        Ok(level)
    }

    pub fn set(&self, level: usize) -> &[usize] {
        &self.sets[level]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    fn last_round(&self) -> Option<usize> {
        self.sets.iter().filter_map(|s| s.last().copied()).max()
    }
}

//! Heteroscedastic noise: a fixed per-round schedule of variance bounds and
//! a zero-mean distribution scaled to match each bound.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `N(0, σ_t²)`.
    #[default]
    Gaussian,
    /// Uniform on `[-σ_t√3, σ_t√3]`, which has variance exactly `σ_t²`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    noise_bound: f64,
    schedule: Vec<f64>,
    kind: NoiseKind,
}

impl NoiseSpec {
    /// `schedule[t - 1]` is the standard deviation revealed at round `t`.
    pub fn new(noise_bound: f64, schedule: Vec<f64>, kind: NoiseKind) -> Result<Self> {
        if !(noise_bound > 0.0 && noise_bound.is_finite()) {
            return Err(invalid(format!("R must be positive and finite, got {noise_bound}")));
        }
        for (i, &s) in schedule.iter().enumerate() {
            // σ_t = R is allowed: both kinds are then still R-sub-Gaussian.
            if !(s.is_finite() && (0.0..=noise_bound).contains(&s)) {
                return Err(invalid(format!(
                    "sigma at round {} is {s}, must lie in [0, R = {noise_bound}]",
                    i + 1
                )));
            }
        }
        Ok(Self {
            noise_bound,
            schedule,
            kind,
        })
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn schedule(&self) -> &[f64] {
        &self.schedule
    }

    pub fn len(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    /// σ_t for 1-based round `t`.
    pub fn sigma(&self, t: usize) -> Result<f64> {
        t.checked_sub(1)
            .and_then(|i| self.schedule.get(i).copied())
            .ok_or_else(|| invalid(format!("round {t} outside schedule of length {}", self.schedule.len())))
    }

    /// `J = Σ σ_t²` over the whole schedule.
    pub fn total_variance(&self) -> f64 {
        self.schedule.iter().map(|s| s * s).sum()
    }
}

/// Draws `ε_t` for 1-based round `t`.
pub fn sample_noise<R: Rng + ?Sized>(spec: &NoiseSpec, t: usize, rng: &mut R) -> Result<f64> {
    let sigma = spec.sigma(t)?;
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(match spec.kind {
        NoiseKind::Gaussian => {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        }
        NoiseKind::Uniform => {
            let half_width = sigma * 3f64.sqrt();
            rng.random_range(-half_width..=half_width)
        }
    })
}

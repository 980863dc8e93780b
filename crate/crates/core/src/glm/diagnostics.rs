//! Test-side diagnostics for an FTRL run against a known parameter.

use nalgebra::DVector;

use super::model::{glm_loss, GlmModel};
use crate::error::{invalid, Result};

/// One prequential round: `iterate` was computed before `reward` was seen.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineStep {
    pub action: DVector<f64>,
    pub reward: f64,
    pub iterate: DVector<f64>,
}

/// `reg_t = Σ_{s≤t} ℓ(a_sᵀθ_s, r_s) − ℓ(a_sᵀθ*, r_s)` for every prefix `t`.
pub fn online_regression_regret_curve(steps: &[OnlineStep], truth: &DVector<f64>, model: &GlmModel) -> Vec<f64> {
    let mut total = 0.0;
    steps
        .iter()
        .map(|s| {
            total += glm_loss(s.action.dot(&s.iterate), s.reward, model).0
                - glm_loss(s.action.dot(truth), s.reward, model).0;
            total
        })
        .collect()
}

/// `reg_T` over the whole run.
pub fn online_regression_regret(steps: &[OnlineStep], truth: &DVector<f64>, model: &GlmModel) -> f64 {
    online_regression_regret_curve(steps, truth, model)
        .last()
        .copied()
        .unwrap_or(0.0)
}

/// Whether `Σ_{s≤t} (a_sᵀ(θ_s − θ*))² ≤ (4/κ) reg_t + (8R²/κ²) log(4t²/δ)`
/// holds at every `t`.
pub fn convexity_inequality_check(
    steps: &[OnlineStep],
    truth: &DVector<f64>,
    model: &GlmModel,
    noise_bound: f64,
    delta: f64,
) -> Result<bool> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let kappa = model.kappa();
    let regret = online_regression_regret_curve(steps, truth, model);
    let mut lhs = 0.0;
    for (i, (step, reg)) in steps.iter().zip(regret).enumerate() {
        let t = (i + 1) as f64;
        let err = step.action.dot(&(&step.iterate - truth));
        lhs += err * err;
        let rhs = 4.0 / kappa * reg + 8.0 * noise_bound.powi(2) / kappa.powi(2) * (4.0 * t * t / delta).ln();
        if lhs > rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Closed-form high-probability bound on `reg_t` for FTRL with the default
/// regularizer: `8A²K²B²/κ + (9/2κ) R² log²(4t²/δ)
/// + 3 (σ_max²/κ) d log(1 + tAκ²/(4dK²))`.
pub fn ftrl_regret_bound(t: usize, model: &GlmModel, noise_bound: f64, sigma_max: f64, delta: f64) -> Result<f64> {
    if t == 0 {
        return Err(invalid("rounds are 1-based"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(noise_bound >= 0.0 && sigma_max >= 0.0) {
        return Err(invalid("noise bounds must be non-negative"));
    }
    let (a, b, k, kappa) = (model.action_bound(), model.param_bound(), model.lipschitz(), model.kappa());
    let (t, d) = (t as f64, model.dim() as f64);
    Ok(8.0 * (a * k * b).powi(2) / kappa
        + 4.5 / kappa * noise_bound.powi(2) * (4.0 * t * t / delta).ln().powi(2)
        + 3.0 * sigma_max.powi(2) / kappa * d * (1.0 + t * a * kappa.powi(2) / (4.0 * d * k * k)).ln())
}

//! Online-to-confidence-set conversion with one FTRL learner per level.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ftrl::ftrl_step_from;
use super::model::GlmModel;
use crate::error::{invalid, Error, Result};
use crate::ml2::ConfidenceSubroutine;

/// `{θ : ‖θ − center‖²_V̄ ≤ radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidConfidenceSet {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    shape_inv: DMatrix<f64>,
    radius: f64,
}

impl EllipsoidConfidenceSet {
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(invalid(format!("ellipsoid radius must be finite and non-negative, got {radius}")));
        }
        if shape.nrows() != center.len() || shape.ncols() != center.len() {
            return Err(invalid("shape matrix does not match the center's dimension"));
        }
        let shape_inv = shape
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("shape matrix is not positive definite"))?
            .inverse();
        Ok(Self {
            center,
            shape,
            shape_inv,
            radius,
        })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self {
            radius,
            ..self.clone()
        }
    }

    /// `‖θ − center‖²_V̄`.
    pub fn distance_sq(&self, theta: &DVector<f64>) -> f64 {
        let diff = theta - &self.center;
        diff.dot(&(&self.shape * &diff))
    }

    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        self.distance_sq(theta) <= self.radius
    }

    /// `max_{θ ∈ set} aᵀθ = aᵀcenter + √(radius · aᵀV̄⁻¹a)`.
    pub fn max_linear(&self, action: &DVector<f64>) -> f64 {
        let spread = action.dot(&(&self.shape_inv * action)).max(0.0);
        action.dot(&self.center) + (self.radius * spread).sqrt()
    }
}

/// Optimistic reward over an ellipsoid: `h(clip(max_θ aᵀθ, −AB, AB))`.
pub fn ucb_value_glm(set: &EllipsoidConfidenceSet, action: &DVector<f64>, model: &GlmModel) -> f64 {
    model.clipped_mean(set.max_linear(action))
}

/// Constants entering the GLM confidence radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmBetaParams {
    pub lipschitz: f64,
    pub kappa: f64,
    pub action_bound: f64,
    pub param_bound: f64,
    pub noise_bound: f64,
    pub sigma_bar: f64,
    pub dim: usize,
    pub delta: f64,
    pub num_levels: usize,
    pub lambda: f64,
}

impl GlmBetaParams {
    pub fn from_model(model: &GlmModel, noise_bound: f64, sigma_bar: f64, delta: f64, num_levels: usize, lambda: f64) -> Self {
        Self {
            lipschitz: model.lipschitz(),
            kappa: model.kappa(),
            action_bound: model.action_bound(),
            param_bound: model.param_bound(),
            noise_bound,
            sigma_bar,
            dim: model.dim(),
            delta,
            num_levels,
            lambda,
        }
    }
}

/// `1 + 32A²K²B²/κ² + (26/κ²) R² log²(4t²L/δ)
///  + 12 (2^{2(l+1)} σ̄²/κ²) d log(1 + tAκ²/(4dK²)) + λB²`.
///
/// The value bounds the squared `V̄`-norm directly.
pub fn beta_glm(t: usize, level: usize, p: &GlmBetaParams) -> Result<f64> {
    if t == 0 {
        return Err(invalid("rounds are 1-based"));
    }
    if level >= p.num_levels {
        return Err(invalid(format!("level {level} outside 0..{}", p.num_levels)));
    }
    if !(p.delta > 0.0 && p.delta < 0.25) {
        return Err(invalid(format!("delta must lie in (0, 1/4), got {}", p.delta)));
    }
    let positive = [
        p.lipschitz,
        p.kappa,
        p.action_bound,
        p.param_bound,
        p.noise_bound,
        p.sigma_bar,
        p.lambda,
    ];
    if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || p.dim == 0 {
        return Err(invalid("GLM radius constants must be positive and finite"));
    }
    let (k, kappa, a, b) = (p.lipschitz, p.kappa, p.action_bound, p.param_bound);
    let (t, d, levels) = (t as f64, p.dim as f64, p.num_levels as f64);
    let log_conf = (4.0 * t * t * levels / p.delta).ln();
    let level_var = (2.0 * (level + 1) as f64).exp2() * p.sigma_bar.powi(2);
    Ok(1.0
        + 32.0 * (a * k * b).powi(2) / kappa.powi(2)
        + 26.0 / kappa.powi(2) * p.noise_bound.powi(2) * log_conf.powi(2)
        + 12.0 * level_var / kappa.powi(2) * d * (1.0 + t * a * kappa.powi(2) / (4.0 * d * k * k)).ln()
        + p.lambda * b * b)
}

/// Everything one level keeps between updates.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelLearnerState {
    lambda: f64,
    clip_z: bool,
    data: Vec<(DVector<f64>, f64)>,
    /// FTRL iterate over all of this level's data.
    theta: DVector<f64>,
    /// Iterate available before each datum arrived.
    prequential: Vec<DVector<f64>>,
    /// Predictions `z_s = a_sᵀθ_s` with `θ_s` including round `s`.
    z: Vec<f64>,
    shape: DMatrix<f64>,
    /// `Σ_s z_s a_s`.
    xz: DVector<f64>,
    center: DVector<f64>,
}

impl LevelLearnerState {
    pub fn new(dim: usize, lambda: f64, clip_z: bool) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            lambda,
            clip_z,
            data: Vec::new(),
            theta: DVector::zeros(dim),
            prequential: Vec::new(),
            z: Vec::new(),
            shape: DMatrix::identity(dim, dim) * lambda,
            xz: DVector::zeros(dim),
            center: DVector::zeros(dim),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn data(&self) -> &[(DVector<f64>, f64)] {
        &self.data
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn prequential_iterates(&self) -> &[DVector<f64>] {
        &self.prequential
    }

    pub fn predictions(&self) -> &[f64] {
        &self.z
    }

    /// `V̄ = λI + Σ a aᵀ`.
    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn xz(&self) -> &DVector<f64> {
        &self.xz
    }

    /// Ridge center `θ̂ = V̄⁻¹ Σ z_s a_s`.
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn confidence_set(&self, radius: f64) -> Result<EllipsoidConfidenceSet> {
        EllipsoidConfidenceSet::new(self.center.clone(), self.shape.clone(), radius)
    }
}

/// Feeds `(a_t, r_t)` to a level: refits FTRL on the level's data, records
/// `z_t`, updates `V̄` and the ridge center, and returns the new set with
/// radius `beta`.
pub fn gloc_update(
    state: &mut LevelLearnerState,
    action: &DVector<f64>,
    reward: f64,
    model: &GlmModel,
    beta: f64,
) -> Result<EllipsoidConfidenceSet> {
    if action.len() != model.dim() {
        return Err(invalid(format!("action has dimension {}, expected {}", action.len(), model.dim())));
    }
    if action.norm() > model.action_bound() * (1.0 + 1e-12) {
        return Err(invalid(format!("action norm {} exceeds A = {}", action.norm(), model.action_bound())));
    }
    state.data.push((action.clone(), reward));
    let theta = match ftrl_step_from(&state.data, model, model.ftrl_regularizer(), state.theta.clone()) {
        Ok(theta) => theta,
        Err(e) => {
            state.data.pop();
            return Err(e);
        }
    };
    state.prequential.push(std::mem::replace(&mut state.theta, theta));

    let mut z = action.dot(&state.theta);
    if state.clip_z {
        z = z.clamp(-model.domain_edge(), model.domain_edge());
    }
    state.z.push(z);
    state.shape.ger(1.0, action, action, 1.0);
    state.xz.axpy(z, action, 1.0);
    state.center = state
        .shape
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("V̄ lost positive definiteness"))?
        .solve(&state.xz);
    state.confidence_set(beta)
}

#[derive(Debug, Clone)]
struct GlocLevel {
    state: LevelLearnerState,
    set: EllipsoidConfidenceSet,
}

/// Per-level GLOC confidence sets for generalized linear rewards.
#[derive(Debug, Clone)]
pub struct GlocSubroutine {
    model: GlmModel,
    params: GlmBetaParams,
    levels: Vec<GlocLevel>,
}

impl GlocSubroutine {
    pub fn new(model: GlmModel, params: GlmBetaParams, clip_z: bool) -> Result<Self> {
        beta_glm(1, 0, &params)?;
        let levels = (0..params.num_levels)
            .map(|l| {
                let state = LevelLearnerState::new(model.dim(), params.lambda, clip_z)?;
                let set = state.confidence_set(beta_glm(1, l, &params)?)?;
                Ok(GlocLevel { state, set })
            })
            .collect::<Result<_>>()?;
        Ok(Self { model, params, levels })
    }

    pub fn model(&self) -> &GlmModel {
        &self.model
    }

    /// Radius of the set used to act at round `t`: the set holds data up to
    /// round `t − 1`, so its radius is evaluated there.
    pub fn radius(&self, t: usize, level: usize) -> f64 {
        beta_glm(t.saturating_sub(1).max(1), level, &self.params).expect("parameters validated at construction")
    }

    /// The ellipsoid used to act at round `t`.
    pub fn confidence_set(&self, level: usize, t: usize) -> EllipsoidConfidenceSet {
        self.levels[level].set.with_radius(self.radius(t, level))
    }
}

impl ConfidenceSubroutine for GlocSubroutine {
    type Action = DVector<f64>;
    type Truth = DVector<f64>;
    type LevelState = LevelLearnerState;

    fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn optimistic_value(&self, level: usize, t: usize, action: &DVector<f64>) -> Option<f64> {
        Some(ucb_value_glm(&self.confidence_set(level, t), action, &self.model))
    }

    fn update(&mut self, level: usize, t: usize, action: &DVector<f64>, reward: f64) -> Result<()> {
        let beta = beta_glm(t, level, &self.params)?;
        let entry = self
            .levels
            .get_mut(level)
            .ok_or_else(|| Error::InvalidArgument(format!("level {level} out of range")))?;
        entry.set = gloc_update(&mut entry.state, action, reward, &self.model, beta)?;
        Ok(())
    }

    fn covers(&self, level: usize, t: usize, truth: &DVector<f64>) -> bool {
        self.levels[level].set.distance_sq(truth) <= self.radius(t, level)
    }

    fn level_state(&self, level: usize) -> &LevelLearnerState {
        &self.levels[level].state
    }
}

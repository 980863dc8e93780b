//! Follow-the-regularized-leader for the GLM loss, solved exactly by damped
//! Newton.

use nalgebra::{DMatrix, DVector};

use super::model::{glm_loss, GlmModel};
use crate::error::{invalid, Error, Result};

pub const FTRL_TOLERANCE: f64 = 1e-10;
pub const FTRL_MAX_ITERATIONS: usize = 200;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

fn objective(data: &[(DVector<f64>, f64)], model: &GlmModel, reg: f64, theta: &DVector<f64>) -> f64 {
    reg * theta.norm_squared()
        + data
            .iter()
            .map(|(a, r)| glm_loss(a.dot(theta), *r, model).0)
            .sum::<f64>()
}

/// Gradient of `reg ‖θ‖² + Σ ℓ(θᵀa_s, r_s)` at `theta`.
pub fn ftrl_objective_gradient(
    data: &[(DVector<f64>, f64)],
    model: &GlmModel,
    reg: f64,
    theta: &DVector<f64>,
) -> DVector<f64> {
    let mut grad = theta * (2.0 * reg);
    for (a, r) in data {
        let (_, d1, _) = glm_loss(a.dot(theta), *r, model);
        grad.axpy(d1, a, 1.0);
    }
    grad
}

fn hessian(data: &[(DVector<f64>, f64)], model: &GlmModel, reg: f64, theta: &DVector<f64>) -> DMatrix<f64> {
    let d = theta.len();
    let mut h = DMatrix::identity(d, d) * (2.0 * reg);
    for (a, r) in data {
        let (_, _, d2) = glm_loss(a.dot(theta), *r, model);
        h.ger(d2, a, a, 1.0);
    }
    h
}

/// `argmin_θ reg ‖θ‖² + Σ_s ℓ(θᵀa_s, r_s)`, starting from zero.
pub fn ftrl_step(data: &[(DVector<f64>, f64)], model: &GlmModel, reg: f64) -> Result<DVector<f64>> {
    ftrl_step_from(data, model, reg, DVector::zeros(model.dim()))
}

/// As [`ftrl_step`], warm-started at `init`.
pub fn ftrl_step_from(
    data: &[(DVector<f64>, f64)],
    model: &GlmModel,
    reg: f64,
    init: DVector<f64>,
) -> Result<DVector<f64>> {
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(invalid(format!("regularizer weight must be positive, got {reg}")));
    }
    if init.len() != model.dim() {
        return Err(invalid("initial point has the wrong dimension"));
    }
    for (a, r) in data {
        if a.len() != model.dim() || !r.is_finite() {
            return Err(invalid("datum with wrong dimension or non-finite reward"));
        }
    }

    let mut theta = init;
    let mut grad = ftrl_objective_gradient(data, model, reg, &theta);
    for _ in 0..FTRL_MAX_ITERATIONS {
        if grad.norm() <= FTRL_TOLERANCE {
            return Ok(theta);
        }
        // Hessian ⪰ 2·reg·I, so Cholesky cannot fail for a positive weight.
        let chol = hessian(data, model, reg, &theta)
            .cholesky()
            .ok_or_else(|| invalid("FTRL Hessian is not positive definite"))?;
        let step = -chol.solve(&grad);
        let value = objective(data, model, reg, &theta);
        let slope = grad.dot(&step);

        let mut scale = 1.0;
        let mut accepted = None;
        // Once the predicted decrease is below the objective's round-off the
        // line search only sees noise; the full step is then the right move.
        let searching = -slope > f64::EPSILON * 16.0 * (1.0 + value.abs());
        for _ in 0..if searching { MAX_HALVINGS } else { 0 } {
            let next = &theta + &step * scale;
            if objective(data, model, reg, &next) <= value + ARMIJO * scale * slope {
                accepted = Some(next);
                break;
            }
            scale *= 0.5;
        }
        theta = accepted.unwrap_or_else(|| &theta + &step);
        grad = ftrl_objective_gradient(data, model, reg, &theta);
    }
    let grad_norm = grad.norm();
    if grad_norm <= FTRL_TOLERANCE {
        Ok(theta)
    } else {
        Err(Error::NonConvergence {
            iterations: FTRL_MAX_ITERATIONS,
            grad_norm,
        })
    }
}

/// Prequential FTRL: `predict` returns the minimizer over rounds seen so far,
/// `observe` adds the next round.
#[derive(Debug, Clone)]
pub struct FtrlLearner {
    model: GlmModel,
    reg: f64,
    data: Vec<(DVector<f64>, f64)>,
    theta: DVector<f64>,
}

impl FtrlLearner {
    pub fn new(model: GlmModel) -> Self {
        let reg = model.ftrl_regularizer();
        let theta = DVector::zeros(model.dim());
        Self {
            model,
            reg,
            data: Vec::new(),
            theta,
        }
    }

    pub fn predict(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn observe(&mut self, action: DVector<f64>, reward: f64) -> Result<()> {
        self.data.push((action, reward));
        self.theta = ftrl_step_from(&self.data, &self.model, self.reg, self.theta.clone())?;
        Ok(())
    }

    pub fn data(&self) -> &[(DVector<f64>, f64)] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::Link;

    #[test]
    fn empty_data_gives_zero() {
        let m = GlmModel::new(Link::Logistic, 3, 1.0, 1.0).unwrap();
        assert_eq!(ftrl_step(&[], &m, m.ftrl_regularizer()).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn single_identity_datum() {
        let m = GlmModel::new(Link::Identity, 3, 1.0, 1.0).unwrap();
        let data = vec![(DVector::from_vec(vec![1.0, 0.0, 0.0]), 1.0)];
        // (4I + e₁e₁ᵀ)⁻¹ e₁ = e₁ / 5
        let theta = ftrl_step(&data, &m, m.ftrl_regularizer()).unwrap();
        assert!((theta - DVector::from_vec(vec![0.2, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn logistic_reaches_tolerance() {
        let m = GlmModel::new(Link::Logistic, 2, 1.0, 3.0).unwrap();
        let data: Vec<_> = (0..50)
            .map(|i| {
                let ang = i as f64 * 0.7;
                (DVector::from_vec(vec![ang.cos(), ang.sin()]), if i % 3 == 0 { 1.0 } else { 0.0 })
            })
            .collect();
        let reg = m.ftrl_regularizer();
        let theta = ftrl_step(&data, &m, reg).unwrap();
        assert!(ftrl_objective_gradient(&data, &m, reg, &theta).norm() <= FTRL_TOLERANCE);
        let warm = ftrl_step_from(&data, &m, reg, DVector::from_vec(vec![5.0, -5.0])).unwrap();
        assert!((warm - theta).norm() < 1e-9);
    }

    #[test]
    fn learner_is_prequential() {
        let m = GlmModel::new(Link::Identity, 1, 1.0, 1.0).unwrap();
        let mut learner = FtrlLearner::new(m);
        assert_eq!(learner.predict()[0], 0.0);
        learner.observe(DVector::from_vec(vec![1.0]), 1.0).unwrap();
        assert!((learner.predict()[0] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let m = GlmModel::new(Link::Identity, 2, 1.0, 1.0).unwrap();
        assert!(ftrl_step(&[], &m, 0.0).is_err());
        assert!(ftrl_step(&[(DVector::zeros(3), 1.0)], &m, 1.0).is_err());
    }
}

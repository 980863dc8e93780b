use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// `h(z) = z`.
    Identity,
    /// `h(z) = 1 / (1 + e^{-z})`.
    Logistic,
    /// `h(z) = c z`.
    Scaled(f64),
}

/// A link function with its certified constants on `(−AB, AB)`.
///
/// Outside that interval `h` is continued linearly with the boundary slope,
/// which keeps the loss convex with curvature at least `κ` everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    link: Link,
    dim: usize,
    action_bound: f64,
    param_bound: f64,
    lipschitz: f64,
    kappa: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl GlmModel {
    /// Derives `K` and `κ` for the link and verifies `κ ≤ h′ ≤ K` and
    /// monotonicity on a 10⁴-point grid over `(−AB, AB)`.
    pub fn new(link: Link, dim: usize, action_bound: f64, param_bound: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(action_bound > 0.0 && action_bound.is_finite() && param_bound > 0.0 && param_bound.is_finite()) {
            return Err(invalid("A and B must be positive and finite"));
        }
        let edge = action_bound * param_bound;
        let (lipschitz, kappa) = match link {
            Link::Identity => (1.0, 1.0),
            Link::Scaled(c) if c > 0.0 && c.is_finite() => (c, c),
            Link::Scaled(c) => return Err(invalid(format!("scaled link needs a positive slope, got {c}"))),
            Link::Logistic => {
                let s = sigmoid(edge);
                (0.25, s * (1.0 - s))
            }
        };
        if !(kappa > 0.0) {
            return Err(invalid(format!("derivative floor vanishes on (-{edge}, {edge})")));
        }
        let model = Self {
            link,
            dim,
            action_bound,
            param_bound,
            lipschitz,
            kappa,
        };
        let tol = 1e-12 * lipschitz;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..GRID_POINTS {
            let z = -edge + 2.0 * edge * i as f64 / GRID_POINTS as f64;
            let d = model.link_derivative(z);
            if d < kappa - tol || d > lipschitz + tol {
                return Err(invalid(format!("h'({z}) = {d} outside [{kappa}, {lipschitz}]")));
            }
            let h = model.mean(z);
            if h < prev {
                return Err(invalid(format!("link is not monotone near {z}")));
            }
            prev = h;
        }
        Ok(model)
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `A`, the bound on action norms.
    pub fn action_bound(&self) -> f64 {
        self.action_bound
    }

    /// `B`, the bound on parameter norms.
    pub fn param_bound(&self) -> f64 {
        self.param_bound
    }

    /// `K`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `κ = inf h′` on `(−AB, AB)`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `AB`, the half-width of the certified domain.
    pub fn domain_edge(&self) -> f64 {
        self.action_bound * self.param_bound
    }

    /// `φ(θ) = (2A²K²/κ)‖θ‖²` weight.
    pub fn ftrl_regularizer(&self) -> f64 {
        2.0 * self.action_bound.powi(2) * self.lipschitz.powi(2) / self.kappa
    }

    /// `h(z)`, linearly continued outside `[−AB, AB]`.
    pub fn mean(&self, z: f64) -> f64 {
        match self.link {
            Link::Identity => z,
            Link::Scaled(c) => c * z,
            Link::Logistic => {
                let edge = self.domain_edge();
                if z.abs() <= edge {
                    sigmoid(z)
                } else {
                    let b = edge.copysign(z);
                    sigmoid(b) + self.kappa * (z - b)
                }
            }
        }
    }

    /// `h′(z)`.
    pub fn link_derivative(&self, z: f64) -> f64 {
        match self.link {
            Link::Identity => 1.0,
            Link::Scaled(c) => c,
            Link::Logistic => {
                if z.abs() <= self.domain_edge() {
                    let s = sigmoid(z);
                    s * (1.0 - s)
                } else {
                    self.kappa
                }
            }
        }
    }

    /// `m(z)` with `m′ = h`.
    pub fn antiderivative(&self, z: f64) -> f64 {
        match self.link {
            Link::Identity => 0.5 * z * z,
            Link::Scaled(c) => 0.5 * c * z * z,
            Link::Logistic => {
                let edge = self.domain_edge();
                if z.abs() <= edge {
                    softplus(z)
                } else {
                    let b = edge.copysign(z);
                    let u = z - b;
                    softplus(b) + sigmoid(b) * u + 0.5 * self.kappa * u * u
                }
            }
        }
    }

    /// Mean reward `h(θᵀa)` clipped to the certified domain.
    pub fn clipped_mean(&self, z: f64) -> f64 {
        let edge = self.domain_edge();
        self.mean(z.clamp(-edge, edge))
    }
}

/// `ℓ(z, r) = −rz + m(z)` with its first and second derivatives in `z`.
pub fn glm_loss(z: f64, r: f64, model: &GlmModel) -> (f64, f64, f64) {
    (
        -r * z + model.antiderivative(z),
        model.mean(z) - r,
        model.link_derivative(z),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let id = GlmModel::new(Link::Identity, 1, 1.0, 2.0).unwrap();
        let (v, d1, d2) = glm_loss(2.0, 1.0, &id);
        assert_eq!((v, d1, d2), (0.0, 1.0, 1.0));
        let lg = GlmModel::new(Link::Logistic, 1, 1.0, 1.0).unwrap();
        assert!((glm_loss(0.0, 0.0, &lg).0 - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_constants() {
        let m = GlmModel::new(Link::Logistic, 3, 1.0, 2.0).unwrap();
        assert_eq!(m.lipschitz(), 0.25);
        let s = sigmoid(2.0);
        assert!((m.kappa() - s * (1.0 - s)).abs() < 1e-15);
    }

    #[test]
    fn extension_is_continuous_and_consistent() {
        let m = GlmModel::new(Link::Logistic, 1, 1.0, 1.5).unwrap();
        let e = m.domain_edge();
        for b in [e, -e] {
            assert!((m.mean(b + 1e-9 * b.signum()) - m.mean(b)).abs() < 1e-8);
            assert!((m.antiderivative(b + 1e-9 * b.signum()) - m.antiderivative(b)).abs() < 1e-8);
        }
        // m' = h by central differences, inside and outside the domain
        for z in [-4.0, -1.0, 0.3, 1.2, 3.5] {
            let h = 1e-6;
            let fd = (m.antiderivative(z + h) - m.antiderivative(z - h)) / (2.0 * h);
            assert!((fd - m.mean(z)).abs() < 1e-7, "z = {z}");
            let fd2 = (m.mean(z + h) - m.mean(z - h)) / (2.0 * h);
            assert!((fd2 - m.link_derivative(z)).abs() < 1e-6, "z = {z}");
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(GlmModel::new(Link::Scaled(0.0), 1, 1.0, 1.0).is_err());
        assert!(GlmModel::new(Link::Identity, 0, 1.0, 1.0).is_err());
        assert!(GlmModel::new(Link::Identity, 1, 0.0, 1.0).is_err());
        assert!(GlmModel::new(Link::Logistic, 1, 1.0, 1000.0).is_err());
    }

    #[test]
    fn link_json() {
        assert_eq!(serde_json::from_str::<Link>("\"logistic\"").unwrap(), Link::Logistic);
        assert_eq!(serde_json::from_str::<Link>("{\"scaled\": 2.0}").unwrap(), Link::Scaled(2.0));
    }
}

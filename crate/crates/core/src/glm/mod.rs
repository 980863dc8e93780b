//! Generalized linear bandits: rewards `h(θᵀa)` for a known monotone link.
//!
//! Each level runs its own FTRL learner on the loss `ℓ(z, r) = −rz + m(z)`
//! with `m′ = h`. The learner's predictions `z_s = a_sᵀθ_s` are turned into
//! an ellipsoidal confidence set by a ridge regression of `z` on `a`.

mod diagnostics;
mod ftrl;
mod gloc;
mod model;

pub use diagnostics::{ftrl_regret_bound, convexity_inequality_check, online_regression_regret, online_regression_regret_curve, OnlineStep};
pub use ftrl::{ftrl_objective_gradient, ftrl_step, ftrl_step_from, FtrlLearner, FTRL_MAX_ITERATIONS, FTRL_TOLERANCE};
pub use gloc::{
    beta_glm, gloc_update, ucb_value_glm, EllipsoidConfidenceSet, GlmBetaParams, GlocSubroutine, LevelLearnerState,
};
pub use model::{glm_loss, GlmModel, Link};

//! Least-squares ERM over a finite function class, applied per level, with
//! enumerated confidence sets and the three confidence-radius schedules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ml2::ConfidenceSubroutine;

/// Identifier of an action in a finite universe, as it appears in JSON.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionId {
    Int(i64),
    Name(String),
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionId::Int(i) => write!(f, "{i}"),
            ActionId::Name(s) => f.write_str(s),
        }
    }
}

/// A finite table of reward functions: `functions[f][a]` is `f(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClassSerde", into = "RawClassSerde")]
pub struct FiniteFunctionClass {
    actions: Vec<ActionId>,
    functions: Vec<Vec<f64>>,
    bound: f64,
}

#[derive(Serialize, Deserialize)]
struct RawClassSerde {
    actions: Vec<ActionId>,
    functions: Vec<Vec<f64>>,
    bound: f64,
}

impl TryFrom<RawClassSerde> for FiniteFunctionClass {
    type Error = Error;

    fn try_from(raw: RawClassSerde) -> Result<Self> {
        Self::new(raw.actions, raw.functions, raw.bound)
    }
}

impl From<FiniteFunctionClass> for RawClassSerde {
    fn from(c: FiniteFunctionClass) -> Self {
        RawClassSerde {
            actions: c.actions,
            functions: c.functions,
            bound: c.bound,
        }
    }
}

impl FiniteFunctionClass {
    pub fn new(actions: Vec<ActionId>, functions: Vec<Vec<f64>>, bound: f64) -> Result<Self> {
        if actions.is_empty() {
            return Err(invalid("action universe is empty"));
        }
        if functions.is_empty() {
            return Err(invalid("function class is empty"));
        }
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(invalid(format!("bound C must be finite and non-negative, got {bound}")));
        }
        for (i, row) in functions.iter().enumerate() {
            if row.len() != actions.len() {
                return Err(invalid(format!(
                    "function {i} has {} values for {} actions",
                    row.len(),
                    actions.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(v.is_finite() && v.abs() <= bound)) {
                return Err(invalid(format!("function {i} takes value {v} outside [-{bound}, {bound}]")));
            }
        }
        Ok(Self {
            actions,
            functions,
            bound,
        })
    }

    /// Actions are labelled `0..n`.
    pub fn from_table(functions: Vec<Vec<f64>>, bound: f64) -> Result<Self> {
        let n = functions.first().map_or(0, Vec::len);
        Self::new((0..n as i64).map(ActionId::Int).collect(), functions, bound)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawClassSerde = serde_json::from_str(s).map_err(|e| invalid(format!("function class JSON: {e}")))?;
        Self::new(raw.actions, raw.functions, raw.bound)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    #[inline]
    pub fn value(&self, function: usize, action: usize) -> f64 {
        self.functions[function][action]
    }

    pub fn function(&self, function: usize) -> &[f64] {
        &self.functions[function]
    }

    pub fn check_action(&self, action: usize) -> Result<()> {
        if action < self.actions.len() {
            Ok(())
        } else {
            Err(invalid(format!("action {action} outside universe of size {}", self.actions.len())))
        }
    }
}

/// `argmin_f Σ (f(a_s) − r_s)²` by enumeration; ties and empty data go to
/// the lowest index.
pub fn erm_fit(data: &[(usize, f64)], class: &FiniteFunctionClass) -> Result<usize> {
    for &(a, _) in data {
        class.check_action(a)?;
    }
    let mut best = (0, f64::INFINITY);
    for f in 0..class.len() {
        let loss: f64 = data
            .iter()
            .map(|&(a, r)| {
                let e = class.value(f, a) - r;
                e * e
            })
            .sum();
        if loss < best.1 {
            best = (f, loss);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaKind {
    /// Sub-Gaussian noise with per-round parameter σ_t.
    #[serde(rename = "subgaussian")]
    Subgaussian,
    /// Variance-aware radius for a fixed `(t, l)`.
    #[serde(rename = "variance_aware")]
    VarianceAware,
    /// Variance-aware radius with a union bound over levels; needs `C = 1`.
    #[serde(rename = "variance_aware_union")]
    VarianceAwareUnion,
}

/// Parameters of a confidence-radius schedule. All thresholds are on the
/// sum-of-squares scale, i.e. they bound `Σ (g(a_s) − f̂(a_s))²` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub kind: BetaKind,
    /// Reward bound `C`.
    pub bound: f64,
    /// Sub-Gaussian parameter `R`.
    pub noise_bound: f64,
    pub sigma_bar: f64,
    pub num_levels: usize,
    pub delta: f64,
    pub alpha: f64,
    /// Sup-norm covering number `N_α`.
    pub covering_number: f64,
}

impl BetaSchedule {
    fn validate(&self, t: usize, level: usize) -> Result<()> {
        if t == 0 {
            return Err(invalid("rounds are 1-based"));
        }
        if level >= self.num_levels {
            return Err(invalid(format!("level {level} outside 0..{}", self.num_levels)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if !(self.covering_number >= 1.0) {
            return Err(invalid(format!("covering number must be at least 1, got {}", self.covering_number)));
        }
        if !(self.bound >= 0.0 && self.noise_bound > 0.0 && self.sigma_bar > 0.0) {
            return Err(invalid("C must be non-negative and R, sigma_bar positive"));
        }
        Ok(())
    }

    /// `(2^(l+1) σ̄)²`, the variance proxy of level `l`.
    fn level_variance(&self, level: usize) -> f64 {
        let s = ((level + 1) as f64).exp2() * self.sigma_bar;
        s * s
    }

    pub fn threshold(&self, t: usize, level: usize) -> Result<f64> {
        match self.kind {
            BetaKind::Subgaussian => beta_subgaussian(t, level, self),
            BetaKind::VarianceAware | BetaKind::VarianceAwareUnion => beta_variance_aware(t, level, self),
        }
    }
}

/// `8 s² log(2 N_α L / δ) + 4 t α (C + √(s² log(4 t (t+1) L / δ)))` with
/// `s = 2^(l+1) σ̄`.
pub fn beta_subgaussian(t: usize, level: usize, p: &BetaSchedule) -> Result<f64> {
    p.validate(t, level)?;
    let s2 = p.level_variance(level);
    let levels = p.num_levels as f64;
    let t = t as f64;
    let first = 8.0 * s2 * (2.0 * p.covering_number * levels / p.delta).ln();
    let second = 4.0 * t * p.alpha * (p.bound + (s2 * (4.0 * t * (t + 1.0) * levels / p.delta).ln()).sqrt());
    Ok(first + second)
}

/// `12 C α t + 4 α R̄ t + (8/3) C R̄ log(2 N_α t² / δ) + 16 s² log(2 N_α t² / δ)`
/// with `R̄ = R √(2 log(4 t² / δ))`. The union form multiplies every log
/// argument by `L` and requires `C = 1`.
pub fn beta_variance_aware(t: usize, level: usize, p: &BetaSchedule) -> Result<f64> {
    p.validate(t, level)?;
    let union = match p.kind {
        BetaKind::VarianceAware => 1.0,
        BetaKind::VarianceAwareUnion => {
            if p.bound != 1.0 {
                return Err(invalid(format!(
                    "union schedule requires C = 1 (got {}); rescale rewards first",
                    p.bound
                )));
            }
            p.num_levels as f64
        }
        BetaKind::Subgaussian => return Err(invalid("subgaussian schedule passed to beta_variance_aware")),
    };
    let c = p.bound;
    let s2 = p.level_variance(level);
    let t = t as f64;
    let r_bar = p.noise_bound * (2.0 * (4.0 * t * t * union / p.delta).ln()).sqrt();
    let log_term = (2.0 * p.covering_number * t * t * union / p.delta).ln();
    Ok(12.0 * c * p.alpha * t
        + 4.0 * p.alpha * r_bar * t
        + 8.0 / 3.0 * c * r_bar * log_term
        + 16.0 * s2 * log_term)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedConfidenceSet {
    pub members: Vec<usize>,
    pub fitted: usize,
    pub threshold: f64,
}

impl EnumeratedConfidenceSet {
    pub fn contains(&self, function: usize) -> bool {
        self.members.binary_search(&function).is_ok()
    }
}

/// `{g : Σ_s (g(a_s) − f̂(a_s))² ≤ β²}` by enumeration.
pub fn build_confidence_set(
    class: &FiniteFunctionClass,
    data: &[(usize, f64)],
    fitted: usize,
    threshold: f64,
) -> EnumeratedConfidenceSet {
    let members = (0..class.len())
        .filter(|&g| {
            g == fitted
                || data
                    .iter()
                    .map(|&(a, _)| {
                        let d = class.value(g, a) - class.value(fitted, a);
                        d * d
                    })
                    .sum::<f64>()
                    <= threshold
        })
        .collect();
    EnumeratedConfidenceSet {
        members,
        fitted,
        threshold,
    }
}

/// `max_{f ∈ set} f(a)`.
pub fn ucb_value(set: &EnumeratedConfidenceSet, class: &FiniteFunctionClass, action: usize) -> Result<f64> {
    class.check_action(action)?;
    set.members
        .iter()
        .map(|&f| class.value(f, action))
        .reduce(f64::max)
        .ok_or(Error::EmptySet)
}

/// Sufficient statistics of one level's data plus its fitted function.
///
/// Squared losses and distances only depend on the data through per-action
/// counts and reward sums, so a level update costs `O(|ℱ|·|𝒜|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmLevelState {
    counts: Vec<f64>,
    reward_sums: Vec<f64>,
    touched: Vec<usize>,
    fitted: usize,
    /// `Σ_s (g(a_s) − f̂(a_s))²` for every function `g`.
    distances: Vec<f64>,
}

impl ErmLevelState {
    fn new(class: &FiniteFunctionClass) -> Self {
        Self {
            counts: vec![0.0; class.num_actions()],
            reward_sums: vec![0.0; class.num_actions()],
            touched: Vec::new(),
            fitted: 0,
            distances: vec![0.0; class.len()],
        }
    }

    pub fn fitted(&self) -> usize {
        self.fitted
    }

    pub fn distance(&self, function: usize) -> f64 {
        self.distances[function]
    }

    pub fn len(&self) -> usize {
        self.counts.iter().sum::<f64>() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.touched.is_empty()
    }

    fn add(&mut self, class: &FiniteFunctionClass, action: usize, reward: f64) {
        if self.counts[action] == 0.0 {
            self.touched.push(action);
            self.touched.sort_unstable();
        }
        self.counts[action] += 1.0;
        self.reward_sums[action] += reward;

        let mut best = (0, f64::INFINITY);
        for f in 0..class.len() {
            // Σ_s (f(a_s) − r_s)² up to the constant Σ_s r_s².
            let loss: f64 = self
                .touched
                .iter()
                .map(|&a| {
                    let v = class.value(f, a);
                    v * (self.counts[a] * v - 2.0 * self.reward_sums[a])
                })
                .sum();
            if loss < best.1 {
                best = (f, loss);
            }
        }
        self.fitted = best.0;
        for g in 0..class.len() {
            self.distances[g] = self
                .touched
                .iter()
                .map(|&a| {
                    let d = class.value(g, a) - class.value(self.fitted, a);
                    self.counts[a] * d * d
                })
                .sum();
        }
    }
}

/// Per-level ERM confidence sets over a finite class.
#[derive(Debug, Clone)]
pub struct ErmSubroutine {
    class: FiniteFunctionClass,
    schedule: BetaSchedule,
    /// Factor `C²` translating a threshold computed on rewards rescaled by
    /// `1/C` back to original units.
    threshold_scale: f64,
    levels: Vec<ErmLevelState>,
}

impl ErmSubroutine {
    /// For the union schedule with `C ≠ 1` the radius is computed on rewards
    /// rescaled by `1/C` (with `R` and `σ̄` scaled alike) and mapped back.
    pub fn new(class: FiniteFunctionClass, schedule: BetaSchedule) -> Result<Self> {
        let (schedule, threshold_scale) = match schedule.kind {
            BetaKind::VarianceAwareUnion if schedule.bound != 1.0 => {
                let c = schedule.bound;
                if c <= 0.0 {
                    return Err(invalid("union schedule needs a positive reward bound to rescale"));
                }
                let scaled = BetaSchedule {
                    bound: 1.0,
                    noise_bound: schedule.noise_bound / c,
                    sigma_bar: schedule.sigma_bar / c,
                    ..schedule
                };
                (scaled, c * c)
            }
            _ => (schedule, 1.0),
        };
        schedule.threshold(1, 0)?;
        let levels = (0..schedule.num_levels).map(|_| ErmLevelState::new(&class)).collect();
        Ok(Self {
            class,
            schedule,
            threshold_scale,
            levels,
        })
    }

    pub fn class(&self) -> &FiniteFunctionClass {
        &self.class
    }

    /// Threshold in original reward units for the set used at round `t`.
    pub fn threshold(&self, t: usize, level: usize) -> f64 {
        self.threshold_scale * self.schedule.threshold(t.max(1), level).expect("schedule validated at construction")
    }

    /// The enumerated set used at round `t` for `level`.
    pub fn confidence_set(&self, level: usize, t: usize) -> EnumeratedConfidenceSet {
        let state = &self.levels[level];
        let threshold = self.threshold(t, level);
        EnumeratedConfidenceSet {
            members: (0..self.class.len())
                .filter(|&g| g == state.fitted || state.distances[g] <= threshold)
                .collect(),
            fitted: state.fitted,
            threshold,
        }
    }
}

impl ConfidenceSubroutine for ErmSubroutine {
    type Action = usize;
    type Truth = usize;
    type LevelState = ErmLevelState;

    fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn optimistic_value(&self, level: usize, t: usize, action: &usize) -> Option<f64> {
        let state = &self.levels[level];
        let threshold = self.threshold(t, level);
        (0..self.class.len())
            .filter(|&g| g == state.fitted || state.distances[g] <= threshold)
            .map(|g| self.class.value(g, *action))
            .reduce(f64::max)
    }

    fn update(&mut self, level: usize, _t: usize, action: &usize, reward: f64) -> Result<()> {
        self.class.check_action(*action)?;
        if !reward.is_finite() {
            return Err(invalid(format!("non-finite reward {reward}")));
        }
        self.levels[level].add(&self.class, *action, reward);
        Ok(())
    }

    fn covers(&self, level: usize, t: usize, truth: &usize) -> bool {
        let state = &self.levels[level];
        *truth == state.fitted || state.distances[*truth] <= self.threshold(t, level)
    }

    fn level_state(&self, level: usize) -> &ErmLevelState {
        &self.levels[level]
    }
}

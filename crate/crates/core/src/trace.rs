//! Per-round bookkeeping: regret, variance budget `J`, gaps and coverage.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: usize,
    /// Position of the chosen action in the round's decision set.
    pub action_index: usize,
    pub optimal_value: f64,
    pub chosen_value: f64,
    pub reward: f64,
    pub sigma: f64,
    pub level: usize,
    pub regret_inst: f64,
    pub regret_cum: f64,
    pub j_cum: f64,
    /// Whether the truth lies in the refreshed set of the round's level.
    pub coverage_ok: Option<bool>,
    /// Whether the truth lay in every level's set when the action was chosen.
    pub covered_before: Option<bool>,
    /// OFU score of every action in the decision set, when recorded.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: Option<u64>,
    pub rounds: Vec<RoundRecord>,
    /// Smallest positive gap seen so far; `+∞` while every action was optimal.
    pub gap: f64,
    pub coverage_violations: usize,
    /// Rounds on which at least one level's confidence set was empty.
    pub empty_set_rounds: usize,
    /// `|Ψ_l|` per level at the end of the run.
    pub level_sizes: Vec<usize>,
}

impl Default for RunTrace {
    fn default() -> Self {
        Self::new(None)
    }
}

impl RunTrace {
    pub fn new(seed: Option<u64>) -> Self {
        Self {
            seed,
            rounds: Vec::new(),
            gap: f64::INFINITY,
            coverage_violations: 0,
            empty_set_rounds: 0,
            level_sizes: Vec::new(),
        }
    }

    /// Appends a round. `values` holds `f*(a)` for every action of the
    /// round's decision set and `chosen` indexes into it.
    pub fn record_round(
        &mut self,
        values: &[f64],
        chosen: usize,
        reward: f64,
        sigma: f64,
        level: usize,
    ) -> Result<&mut RoundRecord> {
        let chosen_value = *values.get(chosen).ok_or_else(|| {
            invalid(format!("action {chosen} outside decision set of size {}", values.len()))
        })?;
        let optimal_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let regret_inst = optimal_value - chosen_value;
        let (regret_cum, j_cum) = self
            .rounds
            .last()
            .map_or((0.0, 0.0), |r| (r.regret_cum, r.j_cum));
        self.gap = self.gap.min(round_gap(values));
        self.rounds.push(RoundRecord {
            t: self.rounds.len() + 1,
            action_index: chosen,
            optimal_value,
            chosen_value,
            reward,
            sigma,
            level,
            regret_inst,
            regret_cum: regret_cum + regret_inst,
            j_cum: j_cum + sigma * sigma,
            coverage_ok: None,
            covered_before: None,
            scores: Vec::new(),
        });
        Ok(self.rounds.last_mut().expect("just pushed"))
    }

    pub fn set_coverage(&mut self, ok: bool) {
        if let Some(last) = self.rounds.last_mut() {
            if last.coverage_ok.replace(ok) != Some(false) && !ok {
                self.coverage_violations += 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.regret_cum)
    }

    pub fn total_variance(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.j_cum)
    }

    pub fn regret_curve(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.regret_cum).collect()
    }
}

/// Gap of a single round: best value minus the best strictly sub-optimal
/// value, `+∞` when every action is optimal.
fn round_gap(values: &[f64]) -> f64 {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .filter(|&&v| v < best)
        .map(|&v| best - v)
        .fold(f64::INFINITY, f64::min)
}

/// Smallest gap over a horizon of decision sets given as `f*` values.
pub fn minimum_gap<'a, I>(rounds: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    rounds.into_iter().map(round_gap).fold(f64::INFINITY, f64::min)
}

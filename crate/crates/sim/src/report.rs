//! Aggregation of per-seed traces into regret, variance, coverage and level
//! occupancy statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::output::TraceRow;
use crate::runner::{ExperimentOutcome, ResolvedParams, SeedFailure};

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// Two-sided 95% Student-t interval for the mean.
    pub ci95: (f64, f64),
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std = var.sqrt();
        let half = if n > 1 {
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
            t.inverse_cdf(0.975) * std / (n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            n,
            mean,
            std,
            median: quantile(&sorted, 0.5),
            q25: quantile(&sorted, 0.25),
            q75: quantile(&sorted, 0.75),
            ci95: (mean - half, mean + half),
        }
    }

    pub fn overlaps(&self, other: &Summary) -> bool {
        self.ci95.0 <= other.ci95.1 && other.ci95.0 <= self.ci95.1
    }
}

/// A binomial proportion with its 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub count: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci95: (f64, f64),
}

impl RateEstimate {
    pub fn new(count: usize, trials: usize) -> Self {
        if trials == 0 {
            return Self {
                count,
                trials,
                rate: 0.0,
                ci95: (0.0, 1.0),
            };
        }
        let z = Normal::standard().inverse_cdf(0.975);
        let n = trials as f64;
        let p = count as f64 / n;
        let denom = 1.0 + z * z / n;
        let center = (p + z * z / (2.0 * n)) / denom;
        let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
        Self {
            count,
            trials,
            rate: p,
            ci95: ((center - half).max(0.0), (center + half).min(1.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCoverage {
    pub level: usize,
    pub violations: RateEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Over all tracked rounds of all seeds.
    pub rounds: RateEstimate,
    /// Seeds with at least one violating round.
    pub any_round: RateEstimate,
    /// Seeds whose last round violates.
    pub final_round: RateEstimate,
    /// Violation rate across seeds at each round `t` (for the level `l_t`
    /// that round was routed to).
    pub per_round: Vec<f64>,
    pub per_level: Vec<LevelCoverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOccupancy {
    pub level: usize,
    pub rounds: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRegret {
    pub seed: u64,
    pub final_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config_echo: Option<serde_json::Value>,
    pub params: Option<ResolvedParams>,
    pub per_seed_final_regret: Vec<SeedRegret>,
    pub final_regret: Summary,
    /// Curves cover the rounds shared by every seed.
    pub mean_curve: Vec<f64>,
    pub median_curve: Vec<f64>,
    pub q25_curve: Vec<f64>,
    pub q75_curve: Vec<f64>,
    /// Empirical `J = Σ σ_t²` per seed.
    pub total_variance: Summary,
    pub coverage: Option<CoverageReport>,
    pub occupancy: Vec<LevelOccupancy>,
    pub failures: Vec<SeedFailure>,
    pub wall_clock_seconds: Option<f64>,
}

impl AggregateReport {
    /// Aggregates rows grouped by seed; each seed's rows must run `t = 1, 2, …`.
    pub fn from_rows(rows: &[TraceRow]) -> Result<Self, String> {
        let mut order = Vec::new();
        let mut by_seed: BTreeMap<u64, Vec<&TraceRow>> = BTreeMap::new();
        for row in rows {
            let entry = by_seed.entry(row.seed).or_default();
            if entry.is_empty() {
                order.push(row.seed);
            }
            if row.t != entry.len() + 1 {
                return Err(format!("seed {}: expected round {}, found {}", row.seed, entry.len() + 1, row.t));
            }
            entry.push(row);
        }
        if order.is_empty() {
            return Err("no trace rows".into());
        }
        let seeds: Vec<&Vec<&TraceRow>> = order.iter().map(|s| &by_seed[s]).collect();

        let finals: Vec<f64> = seeds.iter().map(|r| r.last().expect("non-empty").regret_cum).collect();
        let per_seed_final_regret = order
            .iter()
            .zip(&finals)
            .map(|(&seed, &final_regret)| SeedRegret { seed, final_regret })
            .collect();

        let common = seeds.iter().map(|r| r.len()).min().expect("non-empty");
        let (mut mean_curve, mut median_curve, mut q25_curve, mut q75_curve) = (vec![], vec![], vec![], vec![]);
        for t in 0..common {
            let mut column: Vec<f64> = seeds.iter().map(|r| r[t].regret_cum).collect();
            mean_curve.push(column.iter().sum::<f64>() / column.len() as f64);
            column.sort_by(f64::total_cmp);
            median_curve.push(quantile(&column, 0.5));
            q25_curve.push(quantile(&column, 0.25));
            q75_curve.push(quantile(&column, 0.75));
        }

        let j: Vec<f64> = seeds.iter().map(|r| r.last().expect("non-empty").j_cum).collect();

        let levels = rows.iter().map(|r| r.level + 1).max().unwrap_or(0);
        let mut occupied = vec![0usize; levels];
        for r in rows {
            occupied[r.level] += 1;
        }
        let occupancy = occupied
            .iter()
            .enumerate()
            .map(|(level, &n)| LevelOccupancy {
                level,
                rounds: n,
                fraction: n as f64 / rows.len() as f64,
            })
            .collect();

        let coverage = rows.iter().any(|r| r.coverage_ok.is_some()).then(|| {
            let violated = |r: &TraceRow| r.coverage_ok == Some(false);
            let tracked = rows.iter().filter(|r| r.coverage_ok.is_some()).count();
            let longest = seeds.iter().map(|r| r.len()).max().expect("non-empty");
            let per_round = (0..longest)
                .map(|t| {
                    let present: Vec<&&TraceRow> = seeds.iter().filter_map(|r| r.get(t)).collect();
                    present.iter().filter(|r| violated(r)).count() as f64 / present.len() as f64
                })
                .collect();
            let per_level = (0..levels)
                .map(|level| {
                    let at: Vec<&TraceRow> = rows.iter().filter(|r| r.level == level && r.coverage_ok.is_some()).collect();
                    LevelCoverage {
                        level,
                        violations: RateEstimate::new(at.iter().filter(|r| violated(r)).count(), at.len()),
                    }
                })
                .collect();
            CoverageReport {
                rounds: RateEstimate::new(rows.iter().filter(|r| violated(r)).count(), tracked),
                any_round: RateEstimate::new(seeds.iter().filter(|r| r.iter().any(|r| violated(r))).count(), seeds.len()),
                final_round: RateEstimate::new(
                    seeds.iter().filter(|r| violated(r.last().expect("non-empty"))).count(),
                    seeds.len(),
                ),
                per_round,
                per_level,
            }
        });

        Ok(Self {
            config_echo: None,
            params: None,
            per_seed_final_regret,
            final_regret: Summary::of(&finals),
            mean_curve,
            median_curve,
            q25_curve,
            q75_curve,
            total_variance: Summary::of(&j),
            coverage,
            occupancy,
            failures: Vec::new(),
            wall_clock_seconds: None,
        })
    }

    pub fn from_outcome(outcome: &ExperimentOutcome) -> Result<Self, String> {
        let rows: Vec<TraceRow> = outcome.traces.iter().flat_map(TraceRow::from_trace).collect();
        let mut report = Self::from_rows(&rows)?;
        report.config_echo = serde_json::to_value(&outcome.config).ok();
        report.params = Some(outcome.params.clone());
        report.failures = outcome.failures.clone();
        report.wall_clock_seconds = Some(outcome.wall_clock_seconds);
        Ok(report)
    }
}

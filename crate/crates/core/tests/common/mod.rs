#![allow(dead_code)]

use hetbandit_core::erm::{BetaKind, BetaSchedule, FiniteFunctionClass};
use hetbandit_core::{Environment, NoiseKind, NoiseSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Finite-class environment with a fixed decision-set stream.
pub struct TableEnv {
    pub class: FiniteFunctionClass,
    pub truth: usize,
    pub sets: Vec<Vec<usize>>,
    pub noise: NoiseSpec,
}

impl Environment for TableEnv {
    type Action = usize;
    type Truth = usize;

    fn horizon(&self) -> usize {
        self.sets.len()
    }

    fn decision_set(&self, t: usize) -> &[usize] {
        &self.sets[t - 1]
    }

    fn mean_reward(&self, action: &usize) -> f64 {
        self.class.value(self.truth, *action)
    }

    fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    fn truth(&self) -> &usize {
        &self.truth
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_class(rng: &mut impl Rng, functions: usize, actions: usize) -> FiniteFunctionClass {
    let table = (0..functions)
        .map(|_| (0..actions).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    FiniteFunctionClass::from_table(table, 1.0).unwrap()
}

pub fn table_env(seed: u64, horizon: usize, schedule: Vec<f64>, noise_bound: f64) -> TableEnv {
    let mut r = rng(seed);
    let class = random_class(&mut r, 12, 6);
    let truth = r.random_range(0..class.len());
    let sets = (0..horizon)
        .map(|_| {
            let mut s: Vec<usize> = (0..6).filter(|_| r.random_bool(0.6)).collect();
            if s.is_empty() {
                s.push(r.random_range(0..6));
            }
            s
        })
        .collect();
    TableEnv {
        class,
        truth,
        sets,
        noise: NoiseSpec::new(noise_bound, schedule, NoiseKind::Gaussian).unwrap(),
    }
}

pub fn subgaussian_schedule(noise_bound: f64, sigma_bar: f64, levels: usize, functions: usize) -> BetaSchedule {
    BetaSchedule {
        kind: BetaKind::Subgaussian,
        bound: 1.0,
        noise_bound,
        sigma_bar,
        num_levels: levels,
        delta: 0.1,
        alpha: 0.0,
        covering_number: functions as f64,
    }
}

//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line to
//! stderr (bypassing the test harness's capture) and the test fails if any
//! criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use hetbandit_core::eluder::{eluder_dimension, EluderMode};
use hetbandit_core::erm::{erm_fit, FiniteFunctionClass};
use hetbandit_core::glm::{ftrl_step, ucb_value_glm, GlmModel, LevelLearnerState, Link, gloc_update};
use hetbandit_sim::online::OnlineRegressionSpec;
use hetbandit_sim::output::{emit_csv, read_csv};
use hetbandit_sim::report::{AggregateReport, Summary};
use hetbandit_sim::{run_experiment, ExperimentConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

struct Verdict {
    pass: bool,
    detail: String,
}

fn criterion(id: u32, name: &str, budget: Duration, body: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let verdict = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = verdict.pass && in_time;
    let line = format!(
        "[{}] criterion {id} {name}: {} ({:.1}s of {}s budget)",
        if pass { "PASS" } else { "FAIL" },
        verdict.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    pass
}

fn config(value: Value) -> ExperimentConfig {
    ExperimentConfig::from_json_str(&value.to_string()).expect("valid acceptance config")
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn report(config: &ExperimentConfig) -> AggregateReport {
    let outcome = run_experiment(config, None).expect("experiment runs");
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    AggregateReport::from_outcome(&outcome).expect("non-empty traces")
}

fn confidence_coverage() -> Verdict {
    let c = config(json!({
        "environment": {"kind": "finite_class", "functions": 20, "actions": 10, "bound": 1.0, "class_seed": 101},
        "noise": {"bound": 2.0, "distribution": "gaussian", "schedule": {"kind": "uniform", "low": 0.0, "high": 2.0}},
        "algorithm": "ml2-erm-5.1",
        "horizon": 500,
        "delta": 0.1,
        "seeds": seeds(400),
    }));
    let cov = report(&c).coverage.expect("coverage tracked");
    let rate = cov.final_round.rate;
    Verdict {
        pass: rate <= 0.2 + 0.06,
        detail: format!("final-round miss rate {rate:.4} over {} seeds (limit 0.26)", cov.final_round.trials),
    }
}

fn gloc_coverage() -> Verdict {
    let c = config(json!({
        "environment": {"kind": "glm", "link": "identity", "theta_star": [0.5, -0.3, 0.4],
                        "action_bound": 1.0, "param_bound": 1.0, "decision_set_size": 20},
        "noise": {"bound": 1.0, "schedule": {"kind": "uniform", "low": 0.0, "high": 1.0}},
        "algorithm": "ml2-gloc",
        "horizon": 300,
        "delta": 0.05,
        "lambda": 1.0,
        "seeds": seeds(400),
    }));
    let cov = report(&c).coverage.expect("coverage tracked");
    let rate = cov.any_round.rate;
    Verdict {
        pass: rate <= 0.2 + 0.06,
        detail: format!("seeds with any miss {rate:.4} over {} seeds (limit 0.26)", cov.any_round.trials),
    }
}

fn regression_spec() -> OnlineRegressionSpec {
    OnlineRegressionSpec {
        link: Link::Identity,
        dim: 2,
        action_bound: 1.0,
        param_bound: 1.0,
        noise_bound: 1.0,
        sigma_max: 0.2,
        horizon: 500,
        delta: 0.05,
    }
}

fn ftrl_regret_bound() -> Verdict {
    let spec = regression_spec();
    let bound = spec.regret_bound().unwrap();
    let regrets: Vec<f64> = (0..200).map(|seed| spec.run(seed).unwrap().regret()).collect();
    let within = regrets.iter().filter(|&&r| r <= bound).count();
    let frac = within as f64 / regrets.len() as f64;
    let worst = regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Verdict {
        pass: frac >= 0.85,
        detail: format!("{within}/200 runs within bound {bound:.3} (max reg_T {worst:.3}; need >= 85%)"),
    }
}

fn convexity_inequality() -> Verdict {
    let spec = regression_spec();
    let violations = (0..200)
        .filter(|&seed| {
            let run = spec.run(seed).unwrap();
            !spec.inequality_holds(&run).unwrap()
        })
        .count();
    let rate = violations as f64 / 200.0;
    Verdict {
        pass: rate <= spec.delta + 0.05,
        detail: format!("violation rate {rate:.4} over 200 runs (limit {:.2})", spec.delta + 0.05),
    }
}

fn unit_action(r: &mut impl Rng, d: usize) -> DVector<f64> {
    let v = DVector::from_fn(d, |_, _| r.random_range(-1.0..1.0));
    let n = v.norm();
    v / n * r.random_range(0.1..1.0)
}

fn oracle_equivalences() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(5);

    let mut erm_mismatch = 0;
    for _ in 0..1000 {
        let (n, k) = (r.random_range(1..20), r.random_range(1..8));
        let table: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let class = FiniteFunctionClass::from_table(table.clone(), 1.0).unwrap();
        let data: Vec<(usize, f64)> = (0..r.random_range(0..30))
            .map(|_| (r.random_range(0..k), r.random_range(-2.0..2.0)))
            .collect();
        let losses: Vec<f64> = table
            .iter()
            .map(|f| data.iter().map(|&(a, y)| (f[a] - y).powi(2)).sum())
            .collect();
        let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let best = losses.iter().position(|&l| l == min).unwrap();
        if erm_fit(&data, &class).unwrap() != best {
            erm_mismatch += 1;
        }
    }

    let mut ftrl_err: f64 = 0.0;
    for _ in 0..200 {
        let d = r.random_range(1..6);
        let model = GlmModel::new(Link::Identity, d, 1.0, 1.0).unwrap();
        let reg = model.ftrl_regularizer();
        let data: Vec<(DVector<f64>, f64)> = (0..r.random_range(0..50))
            .map(|_| (unit_action(&mut r, d), r.random_range(-2.0..2.0)))
            .collect();
        let mut lhs = DMatrix::identity(d, d) * (2.0 * reg);
        let mut rhs = DVector::zeros(d);
        for (a, y) in &data {
            lhs += a * a.transpose();
            rhs += a * *y;
        }
        let closed = lhs.lu().solve(&rhs).unwrap();
        ftrl_err = ftrl_err.max((ftrl_step(&data, &model, reg).unwrap() - closed).amax());
    }

    let (mut ucb_below, mut ucb_gap): (usize, f64) = (0, 0.0);
    for _ in 0..100 {
        let link = if r.random_bool(0.5) { Link::Identity } else { Link::Logistic };
        let model = GlmModel::new(link, 2, 1.0, 2.0).unwrap();
        let mut state = LevelLearnerState::new(2, 1.0, false).unwrap();
        for _ in 0..r.random_range(0..10) {
            let a = unit_action(&mut r, 2);
            gloc_update(&mut state, &a, r.random_range(0.0..1.0), &model, 1.0).unwrap();
        }
        let radius = r.random_range(0.01..2.0);
        let set = state.confidence_set(radius).unwrap();
        let a = unit_action(&mut r, 2);
        let ucb = ucb_value_glm(&set, &a, &model);
        let l_t_inv = set.shape().clone().cholesky().unwrap().l().transpose().try_inverse().unwrap();
        let sampled = (0..10_000)
            .map(|i| {
                let ang = std::f64::consts::TAU * i as f64 / 10_000.0;
                let u = DVector::from_vec(vec![ang.cos(), ang.sin()]);
                model.clipped_mean(a.dot(&(set.center() + &l_t_inv * u * radius.sqrt())))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if ucb < sampled - 1e-12 {
            ucb_below += 1;
        }
        ucb_gap = ucb_gap.max(ucb - sampled);
    }

    Verdict {
        pass: erm_mismatch == 0 && ftrl_err <= 1e-8 && ucb_below == 0 && ucb_gap <= 1e-3,
        detail: format!(
            "erm mismatches {erm_mismatch}/1000, ftrl max error {ftrl_err:.2e}, ucb below samples {ucb_below}/100, max ucb gap {ucb_gap:.2e}"
        ),
    }
}

fn variance_advantage() -> Verdict {
    let run = |algorithm: &str, schedule: Value| {
        report(&config(json!({
            "environment": {"kind": "finite_class", "functions": 20, "actions": 10, "bound": 1.0, "class_seed": 1},
            "noise": {"bound": 2.0, "schedule": schedule},
            "algorithm": algorithm,
            "horizon": 2000,
            "delta": 0.1,
            // top level proxy 2^L·σ̄ ≈ 2R, the baseline's single-level proxy
            "sigma_bar": 0.0312,
            "seeds": seeds(100),
        })))
        .final_regret
    };
    let bursty = json!({"kind": "bursty", "high": 2.0, "low": 0.02, "fraction": 0.01});
    let flat = json!({"kind": "constant", "sigma": 2.0});
    let (ml2_b, base_b): (Summary, Summary) = (run("ml2-erm-4.1", bursty.clone()), run("baseline-eluder-ucb", bursty));
    let (ml2_f, base_f) = (run("ml2-erm-4.1", flat.clone()), run("baseline-eluder-ucb", flat));
    let advantage = ml2_b.mean < 0.5 * base_b.mean;
    let overlap = ml2_f.overlaps(&base_f);
    Verdict {
        pass: advantage && overlap,
        detail: format!(
            "bursty {:.3} vs baseline {:.3}; sigma=R {:.1} [{:.1}, {:.1}] vs {:.1} [{:.1}, {:.1}]",
            ml2_b.mean, base_b.mean, ml2_f.mean, ml2_f.ci95.0, ml2_f.ci95.1, base_f.mean, base_f.ci95.0, base_f.ci95.1
        ),
    }
}

fn brute_force_eluder(table: &[Vec<f64>], k: usize, eps: f64) -> usize {
    fn independent(table: &[Vec<f64>], prefix: &[usize], a: usize, eps: f64) -> bool {
        table.iter().any(|f| {
            table.iter().any(|g| {
                let norm = prefix.iter().map(|&p| (f[p] - g[p]).powi(2)).sum::<f64>().sqrt();
                norm <= eps && f[a] - g[a] > eps
            })
        })
    }
    fn dfs(table: &[Vec<f64>], k: usize, eps: f64, seq: &mut Vec<usize>, best: &mut usize) {
        if seq.len() > *best {
            let mut scales = vec![eps];
            for i in 0..seq.len() {
                for f in table {
                    for g in table {
                        let n = seq[..i].iter().map(|&p| (f[p] - g[p]).powi(2)).sum::<f64>().sqrt();
                        if n >= eps {
                            scales.push(n);
                        }
                    }
                }
            }
            if scales
                .iter()
                .any(|&s| (0..seq.len()).all(|i| independent(table, &seq[..i], seq[i], s)))
            {
                *best = seq.len();
            }
        }
        for a in 0..k {
            if !seq.contains(&a) {
                seq.push(a);
                dfs(table, k, eps, seq, best);
                seq.pop();
            }
        }
    }
    let mut best = 0;
    dfs(table, k, eps, &mut Vec::new(), &mut best);
    best
}

fn eluder_brute_force() -> Verdict {
    let single = FiniteFunctionClass::from_table(vec![vec![0.3, 0.9, 0.1]], 1.0).unwrap();
    let single_dim = eluder_dimension(&single, &[0, 1, 2], 0.5, EluderMode::Exact).unwrap().dimension;
    let binary: Vec<Vec<f64>> = (0..8).map(|m| (0..3).map(|i| (m >> i & 1) as f64).collect()).collect();
    let binary_class = FiniteFunctionClass::from_table(binary, 1.0).unwrap();
    let binary_dim = eluder_dimension(&binary_class, &[0, 1, 2], 0.5, EluderMode::Exact).unwrap().dimension;

    let mut r = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    let instances = 300;
    for _ in 0..instances {
        let k = r.random_range(1..=5);
        let n = r.random_range(1..=8);
        let table: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| r.random_range(0..5) as f64 * 0.25).collect())
            .collect();
        let eps = [0.1, 0.25, 0.3, 0.5, 0.8][r.random_range(0..5)];
        let class = FiniteFunctionClass::from_table(table.clone(), 1.0).unwrap();
        let all: Vec<usize> = (0..k).collect();
        if eluder_dimension(&class, &all, eps, EluderMode::Exact).unwrap().dimension != brute_force_eluder(&table, k, eps) {
            mismatches += 1;
        }
    }
    Verdict {
        pass: single_dim == 0 && binary_dim == 3 && mismatches == 0,
        detail: format!("|F|=1 -> {single_dim}, binary on 3 actions -> {binary_dim}, {mismatches}/{instances} brute-force mismatches"),
    }
}

fn determinism_and_schema() -> Verdict {
    let c = config(json!({
        "environment": {"kind": "finite_class", "functions": 12, "actions": 30, "class_seed": 3, "decision_set_size": 8},
        "noise": {"bound": 1.0, "schedule": {"kind": "uniform", "low": 0.0, "high": 1.0}},
        "algorithm": "ml2-erm-4.1",
        "horizon": 300,
        "seeds": [11, 12, 13],
    }));
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_experiment(&c, Some(1)).unwrap().traces, &a).unwrap();
    emit_csv(&run_experiment(&c, Some(3)).unwrap().traces, &b).unwrap();
    let identical = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();

    let rows = read_csv(&a).unwrap();
    let mut exact = true;
    let mut cum = 0.0;
    for row in &rows {
        if row.t == 1 {
            cum = 0.0;
        }
        cum += row.regret_inst;
        exact &= cum == row.regret_cum;
    }
    Verdict {
        pass: identical && exact && rows.len() == 900,
        detail: format!("byte-identical CSV: {identical}, regret reconstruction exact: {exact}, rows {}", rows.len()),
    }
}

fn gap_direction() -> Verdict {
    let run = |gap: f64| {
        report(&config(json!({
            "environment": {"kind": "needle", "actions": 10, "gap": gap, "bound": 1.0},
            "noise": {"bound": 0.2, "schedule": {"kind": "constant", "sigma": 0.05}},
            "algorithm": "ml2-erm-4.1",
            "horizon": 2000,
            "delta": 0.1,
            "seeds": seeds(100),
        })))
        .final_regret
    };
    let (wide, narrow) = (run(0.5), run(0.1));
    Verdict {
        pass: wide.mean < narrow.mean,
        detail: format!("mean final regret {:.3} at gap 0.5 vs {:.3} at gap 0.1", wide.mean, narrow.mean),
    }
}

#[test]
fn acceptance() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let results = [
        criterion(1, "confidence coverage", min(2), confidence_coverage),
        criterion(2, "GLOC coverage", min(5), gloc_coverage),
        criterion(3, "FTRL regret bound", min(2), ftrl_regret_bound),
        criterion(4, "FTRL convexity inequality", min(2), convexity_inequality),
        criterion(5, "oracle equivalences", min(1), oracle_equivalences),
        criterion(6, "variance-dependent advantage", min(10), variance_advantage),
        criterion(7, "eluder brute force", min(1), eluder_brute_force),
        criterion(8, "determinism and schema", min(2), determinism_and_schema),
        criterion(9, "gap-dependent direction", min(10), gap_direction),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &p)| !p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! Complexity measures of finite function classes: ε-dependence, eluder
//! dimension, width and covering-number upper bounds.

use serde::{Deserialize, Serialize};

use crate::erm::FiniteFunctionClass;
use crate::error::{invalid, Error, Result};

/// Largest universe accepted by the exact eluder search.
pub const EXACT_ACTION_LIMIT: usize = 12;

/// Whether `action` is ε-dependent on `predecessors`: every ordered pair
/// `(f, f̃)` with `√(Σ_i (f(a_i) − f̃(a_i))²) ≤ ε` also has `f(a) − f̃(a) ≤ ε`.
pub fn is_eps_dependent(class: &FiniteFunctionClass, action: usize, predecessors: &[usize], eps: f64) -> Result<bool> {
    if !(eps > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {eps}")));
    }
    class.check_action(action)?;
    for &p in predecessors {
        class.check_action(p)?;
    }
    for f in 0..class.len() {
        for g in 0..class.len() {
            let norm_sq: f64 = predecessors
                .iter()
                .map(|&p| (class.value(f, p) - class.value(g, p)).powi(2))
                .sum();
            if norm_sq.sqrt() <= eps && class.value(f, action) - class.value(g, action) > eps {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EluderMode {
    Exact,
    /// A certified lower bound only.
    GreedyLowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EluderResult {
    pub dimension: usize,
    /// Action indices of a witnessing sequence, in order.
    pub sequence: Vec<usize>,
    pub mode: EluderMode,
    /// A scale `ε′ ≥ ε` at which every element of `sequence` is independent
    /// of its predecessors.
    pub epsilon_prime: Option<f64>,
}

/// Finite union of disjoint half-open intervals `[lo, hi)`, sorted.
#[derive(Debug, Clone, Default, PartialEq)]
struct Intervals(Vec<(f64, f64)>);

impl Intervals {
    fn from_unsorted(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|(lo, hi)| lo < hi);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Self(merged)
    }

    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn contains(&self, x: f64) -> bool {
        self.0.iter().any(|&(lo, hi)| lo <= x && x < hi)
    }

    fn intersect(&self, other: &Self) -> Self {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            let lo = a.0.max(b.0);
            let hi = a.1.min(b.1);
            if lo < hi {
                out.push((lo, hi));
            }
            if a.1 < b.1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self(out)
    }

    fn union(&self, other: &Self) -> Self {
        Self::from_unsorted(self.0.iter().chain(&other.0).copied().collect())
    }
}

/// Scales `ε′` at which `action` is ε′-independent of a predecessor set
/// whose pairwise distances are `norms`: `∪_pairs [‖f − g‖, |f(a) − g(a)|)`.
fn independence_scales(class: &FiniteFunctionClass, pairs: &[(usize, usize)], norms: &[f64], action: usize) -> Intervals {
    Intervals::from_unsorted(
        pairs
            .iter()
            .zip(norms)
            .map(|(&(f, g), &norm)| (norm, (class.value(f, action) - class.value(g, action)).abs()))
            .collect(),
    )
}

/// Eluder dimension at scale `eps` over the given actions.
///
/// Exact mode searches over subsets of `actions` (at most
/// [`EXACT_ACTION_LIMIT`]), tracking for each subset the set of scales
/// `ε′ ≥ ε` at which some ordering of it is a valid independent sequence.
/// Greedy mode appends the first ε-independent action until none is left.
pub fn eluder_dimension(
    class: &FiniteFunctionClass,
    actions: &[usize],
    eps: f64,
    mode: EluderMode,
) -> Result<EluderResult> {
    if !(eps > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {eps}")));
    }
    for &a in actions {
        class.check_action(a)?;
    }
    let mut sorted = actions.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != actions.len() {
        return Err(invalid("action list contains duplicates"));
    }
    match mode {
        EluderMode::Exact => exact_eluder(class, actions, eps),
        EluderMode::GreedyLowerBound => greedy_eluder(class, actions, eps),
    }
}

fn exact_eluder(class: &FiniteFunctionClass, actions: &[usize], eps: f64) -> Result<EluderResult> {
    let n = actions.len();
    if n > EXACT_ACTION_LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: EXACT_ACTION_LIMIT,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..class.len())
        .flat_map(|f| (f + 1..class.len()).map(move |g| (f, g)))
        .collect();
    let norms_of = |subset: usize| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(f, g)| {
                (0..n)
                    .filter(|i| subset >> i & 1 == 1)
                    .map(|i| (class.value(f, actions[i]) - class.value(g, actions[i])).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    };

    let full = 1usize << n;
    let mut feasible = vec![Intervals::default(); full];
    feasible[0] = Intervals(vec![(eps, f64::INFINITY)]);
    for subset in 0..full {
        if feasible[subset].is_empty() {
            continue;
        }
        let norms = norms_of(subset);
        for i in (0..n).filter(|i| subset >> i & 1 == 0) {
            let scales = independence_scales(class, &pairs, &norms, actions[i]);
            let extended = feasible[subset].intersect(&scales);
            if !extended.is_empty() {
                let next = subset | 1 << i;
                feasible[next] = feasible[next].union(&extended);
            }
        }
    }

    let best = (0..full)
        .filter(|&s| !feasible[s].is_empty())
        .max_by(|&a, &b| a.count_ones().cmp(&b.count_ones()).then(b.cmp(&a)))
        .expect("the empty sequence is always feasible");
    let scale = feasible[best].0[0].0;

    // Peel off a valid last element at `scale` until the subset is empty.
    let mut sequence = Vec::with_capacity(best.count_ones() as usize);
    let mut rest = best;
    while rest != 0 {
        let i = (0..n)
            .filter(|i| rest >> i & 1 == 1)
            .find(|&i| {
                let prev = rest & !(1 << i);
                feasible[prev].contains(scale)
                    && independence_scales(class, &pairs, &norms_of(prev), actions[i]).contains(scale)
            })
            .expect("feasible subsets have a valid last element");
        sequence.push(actions[i]);
        rest &= !(1 << i);
    }
    sequence.reverse();
    Ok(EluderResult {
        dimension: sequence.len(),
        sequence,
        mode: EluderMode::Exact,
        epsilon_prime: Some(scale),
    })
}

fn greedy_eluder(class: &FiniteFunctionClass, actions: &[usize], eps: f64) -> Result<EluderResult> {
    let mut sequence: Vec<usize> = Vec::new();
    loop {
        let mut next = None;
        for &a in actions {
            if !sequence.contains(&a) && !is_eps_dependent(class, a, &sequence, eps)? {
                next = Some(a);
                break;
            }
        }
        match next {
            Some(a) => sequence.push(a),
            None => break,
        }
    }
    Ok(EluderResult {
        dimension: sequence.len(),
        sequence,
        mode: EluderMode::GreedyLowerBound,
        epsilon_prime: Some(eps),
    })
}

/// `max f(a) − min f(a)` over `members`.
pub fn width(members: &[usize], class: &FiniteFunctionClass, action: usize) -> Result<f64> {
    class.check_action(action)?;
    let (lo, hi) = members
        .iter()
        .map(|&f| class.value(f, action))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if members.is_empty() {
        Err(Error::EmptySet)
    } else {
        Ok(hi - lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverSpec {
    Finite { size: usize },
    /// Functions `f_θ` with `θ` in the radius-`radius` ball of `R^dim` and
    /// `|f_θ − f_θ'|_∞ ≤ lipschitz · |θ − θ'|_∞`.
    Lipschitz { dim: u32, radius: f64, lipschitz: f64 },
}

/// Upper bound on the sup-norm `α`-covering number: the class size for a
/// finite class, `⌈2 B Lip / α + 1⌉^d` from an axis-aligned grid otherwise.
/// Saturates at `u128::MAX`.
pub fn covering_number_upper(spec: CoverSpec, alpha: f64) -> Result<u128> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    match spec {
        CoverSpec::Finite { size } => Ok(size as u128),
        CoverSpec::Lipschitz { dim, radius, lipschitz } => {
            if !(radius >= 0.0 && lipschitz >= 0.0) {
                return Err(invalid("radius and lipschitz constant must be non-negative"));
            }
            let span = 2.0 * radius * lipschitz / alpha;
            let nearest = span.round();
            let per_axis = if (span - nearest).abs() <= 1e-12 * span.max(1.0) {
                nearest
            } else {
                span.ceil()
            } + 1.0;
            if per_axis >= u128::MAX as f64 {
                return Ok(u128::MAX);
            }
            Ok((per_axis as u128).saturating_pow(dim))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary_class(n: usize) -> FiniteFunctionClass {
        let table = (0..1usize << n)
            .map(|mask| (0..n).map(|i| (mask >> i & 1) as f64).collect())
            .collect();
        FiniteFunctionClass::from_table(table, 1.0).unwrap()
    }

    fn indicators(n: usize) -> FiniteFunctionClass {
        // zero function plus one indicator per action
        let table = (0..=n)
            .map(|i| (0..n).map(|j| if i == j + 1 { 1.0 } else { 0.0 }).collect())
            .collect();
        FiniteFunctionClass::from_table(table, 1.0).unwrap()
    }

    #[test]
    fn dependence_examples() {
        let single = FiniteFunctionClass::from_table(vec![vec![0.3, 0.9]], 1.0).unwrap();
        assert!(is_eps_dependent(&single, 0, &[1], 0.1).unwrap());
        assert!(is_eps_dependent(&single, 0, &[], 0.1).unwrap());
        let constants = FiniteFunctionClass::from_table(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 1.0).unwrap();
        assert!(!is_eps_dependent(&constants, 0, &[], 0.5).unwrap());
        assert!(is_eps_dependent(&constants, 0, &[1], 0.5).unwrap());
        assert!(is_eps_dependent(&constants, 0, &[0], 0.5).unwrap());
        assert!(is_eps_dependent(&constants, 0, &[], 0.0).is_err());
    }

    #[test]
    fn eluder_examples() {
        let single = FiniteFunctionClass::from_table(vec![vec![0.3, 0.9, 0.1]], 1.0).unwrap();
        let r = eluder_dimension(&single, &[0, 1, 2], 0.5, EluderMode::Exact).unwrap();
        assert_eq!(r.dimension, 0);
        assert!(r.sequence.is_empty());

        let r = eluder_dimension(&binary_class(3), &[0, 1, 2], 0.5, EluderMode::Exact).unwrap();
        assert_eq!(r.dimension, 3);

        for n in 1..=6 {
            let class = indicators(n);
            let all: Vec<usize> = (0..n).collect();
            let r = eluder_dimension(&class, &all, 0.5, EluderMode::Exact).unwrap();
            assert_eq!(r.dimension, n, "indicators on {n} actions");
        }
    }

    #[test]
    fn witness_sequence_is_valid() {
        let class = binary_class(4);
        let r = eluder_dimension(&class, &[0, 1, 2, 3], 0.3, EluderMode::Exact).unwrap();
        let scale = r.epsilon_prime.unwrap();
        assert!(scale >= 0.3);
        for (i, &a) in r.sequence.iter().enumerate() {
            assert!(!is_eps_dependent(&class, a, &r.sequence[..i], scale).unwrap());
        }
    }

    #[test]
    fn greedy_is_a_lower_bound() {
        let class = binary_class(3);
        let g = eluder_dimension(&class, &[0, 1, 2], 0.5, EluderMode::GreedyLowerBound).unwrap();
        let e = eluder_dimension(&class, &[0, 1, 2], 0.5, EluderMode::Exact).unwrap();
        assert!(g.dimension <= e.dimension);
        assert_eq!(g.mode, EluderMode::GreedyLowerBound);
    }

    #[test]
    fn exact_mode_size_limit() {
        let class = indicators(13);
        let all: Vec<usize> = (0..13).collect();
        assert!(matches!(
            eluder_dimension(&class, &all, 0.5, EluderMode::Exact),
            Err(Error::SizeLimit { size: 13, .. })
        ));
        assert_eq!(eluder_dimension(&class, &all, 0.5, EluderMode::GreedyLowerBound).unwrap().dimension, 13);
    }

    #[test]
    fn width_examples() {
        let class = FiniteFunctionClass::from_table(vec![vec![0.2], vec![0.5], vec![0.9]], 1.0).unwrap();
        assert_eq!(width(&[1], &class, 0).unwrap(), 0.0);
        assert!((width(&[0, 1, 2], &class, 0).unwrap() - 0.7).abs() < 1e-15);
        assert!(matches!(width(&[], &class, 0), Err(Error::EmptySet)));
        let constants = FiniteFunctionClass::from_table(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 1.0).unwrap();
        assert_eq!(width(&[0, 1], &constants, 1).unwrap(), 1.0);
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_number_upper(CoverSpec::Finite { size: 17 }, 0.3).unwrap(), 17);
        let lip = |dim| CoverSpec::Lipschitz { dim, radius: 1.0, lipschitz: 1.0 };
        assert_eq!(covering_number_upper(lip(1), 1.0).unwrap(), 3);
        assert_eq!(covering_number_upper(lip(2), 0.5).unwrap(), 25);
        assert_eq!(covering_number_upper(lip(200), 1e-6).unwrap(), u128::MAX);
        assert!(covering_number_upper(lip(1), 0.0).is_err());
    }

    fn small_class() -> impl Strategy<Value = FiniteFunctionClass> {
        (1usize..6, 1usize..5).prop_flat_map(|(nf, na)| {
            proptest::collection::vec(proptest::collection::vec(0u8..5, na), nf).prop_map(|rows| {
                let table = rows.into_iter().map(|r| r.into_iter().map(|v| v as f64 * 0.25).collect()).collect();
                FiniteFunctionClass::from_table(table, 1.0).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn dimension_shrinks_with_scale(class in small_class(), e1 in 0.05f64..1.0, extra in 0.0f64..1.0) {
            let all: Vec<usize> = (0..class.num_actions()).collect();
            let d1 = eluder_dimension(&class, &all, e1, EluderMode::Exact).unwrap().dimension;
            let d2 = eluder_dimension(&class, &all, e1 + extra, EluderMode::Exact).unwrap().dimension;
            prop_assert!(d2 <= d1);
        }

        #[test]
        fn dependence_survives_more_predecessors(
            class in small_class(),
            preds in proptest::collection::vec(0usize..4, 0..4),
            more in proptest::collection::vec(0usize..4, 0..3),
            eps in 0.05f64..1.0,
        ) {
            let n = class.num_actions();
            let preds: Vec<usize> = preds.into_iter().map(|p| p % n).collect();
            let mut longer = preds.clone();
            longer.extend(more.into_iter().map(|p| p % n));
            for a in 0..n {
                if is_eps_dependent(&class, a, &preds, eps).unwrap() {
                    prop_assert!(is_eps_dependent(&class, a, &longer, eps).unwrap());
                }
            }
        }

        #[test]
        fn width_is_bounded(class in small_class()) {
            let members: Vec<usize> = (0..class.len()).collect();
            for a in 0..class.num_actions() {
                prop_assert!(width(&members, &class, a).unwrap() <= 2.0 * class.bound());
            }
        }

        #[test]
        fn cover_shrinks_with_alpha(dim in 1u32..4, radius in 0.1f64..3.0, a1 in 0.01f64..1.0, extra in 0.0f64..1.0) {
            let spec = CoverSpec::Lipschitz { dim, radius, lipschitz: 1.0 };
            prop_assert!(covering_number_upper(spec, a1 + extra).unwrap() <= covering_number_upper(spec, a1).unwrap());
        }
    }
}

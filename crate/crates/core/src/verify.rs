//! Named verification suites: exhaustive checks over small trees and seeded
//! randomized checks of the partition's stability properties.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::armset::Arm;
use crate::cell::{assign_unchecked, best_cut_child, gap_of, range_of, Thresholds};
use crate::coloring::{color_of, feas_first, is_robust_pair, ArmOrder};
use crate::dop::{enumerate_tree, is_adjacent, Dop};
use crate::error::{Error, Result};
use crate::oracle::{feas_by_enumeration, OracleBudget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Feas,
    Coloring,
    Stability,
    Consistency,
    CutLemma,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Feas, Suite::Coloring, Suite::Stability, Suite::Consistency, Suite::CutLemma];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Feas => "feas",
            Suite::Coloring => "coloring",
            Suite::Stability => "stability",
            Suite::Consistency => "consistency",
            Suite::CutLemma => "cut-lemma",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}` (expected one of feas, coloring, stability, consistency, cut-lemma)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: u64,
    pub violations: u64,
    pub first_violation: Option<String>,
}

impl VerifyReport {
    fn new(suite: Suite) -> Self {
        VerifyReport {
            suite,
            checks: 0,
            violations: 0,
            first_violation: None,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const FEAS_GRID: [(usize, usize); 4] = [(3, 2), (4, 2), (5, 2), (5, 3)];
pub const COLORING_GRID: [(usize, usize); 4] = [(3, 2), (4, 2), (4, 3), (5, 3)];

/// Tree Feas sets against the total-order enumeration, on every node.
pub fn verify_feas(grid: &[(usize, usize)], budget: &OracleBudget) -> Result<VerifyReport> {
    let mut rep = VerifyReport::new(Suite::Feas);
    for &(k, m) in grid {
        for node in enumerate_tree(k, m, budget.max_nodes)? {
            let fast = node.feas(m)?;
            let slow = feas_by_enumeration(&node, m, budget)?;
            rep.record(fast == slow, || format!("K={k} m={m} {node}: {fast:?} vs {slow:?}"));
        }
    }
    Ok(rep)
}

fn random_order(k: usize, rng: &mut ChaCha8Rng) -> ArmOrder {
    let mut arms: Vec<Arm> = (1..=k).collect();
    arms.shuffle(rng);
    ArmOrder::from_sequence(&arms).expect("shuffle of 1..=K")
}

/// Every parent-child edge under the identity order plus `random_orders`
/// seeded random orders: colors are permutations of the Feas-first set and
/// no arm changes slot across an edge.
pub fn verify_coloring(grid: &[(usize, usize)], random_orders: usize, seed: u64, budget: &OracleBudget) -> Result<VerifyReport> {
    let mut rep = VerifyReport::new(Suite::Coloring);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &(k, m) in grid {
        let nodes = enumerate_tree(k, m, budget.max_nodes)?;
        let mut orders = vec![ArmOrder::identity(k)];
        orders.extend((0..random_orders).map(|_| random_order(k, &mut rng)));
        for order in &orders {
            for node in &nodes {
                let color = color_of(node, m, order)?;
                let g = feas_first(node, m, order)?;
                rep.record(color.as_set() == g && color.slots.len() == m, || {
                    format!("K={k} m={m} {node}: color {:?} is not a permutation of {g:?}", color.slots)
                });
                for child in node.children(m)? {
                    let cc = color_of(&child, m, order)?;
                    rep.record(is_robust_pair(&color, &cc), || {
                        format!("K={k} m={m} {node} -> {child}: {:?} vs {:?} under {order:?}", color.slots, cc.slots)
                    });
                }
            }
        }
    }
    Ok(rep)
}

/// Random instance for the partition checks.
struct Trial {
    m: usize,
    eps: f64,
    c: Thresholds,
    x: Vec<f64>,
}

fn random_trial(max_k: usize, max_m: usize, rng: &mut ChaCha8Rng) -> Trial {
    let k = rng.gen_range(2..=max_k);
    let m = rng.gen_range(1..=max_m.min(k));
    // log-uniform on [1e-3, 1e-1]
    let eps = 10f64.powf(rng.gen_range(-3.0..=-1.0));
    let hi = 1.0 / k as f64;
    let c = Thresholds::new((0..k).map(|_| rng.gen_range(0.0..=hi)).collect()).expect("in range");
    let x = (0..k).map(|_| rng.gen::<f64>()).collect();
    Trial { m, eps, c, x }
}

fn perturb(x: &[f64], radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    x.iter()
        .map(|&v| (v + rng.gen_range(-radius..=radius)).clamp(0.0, 1.0))
        .collect()
}

fn obeys_all(node: &Dop, x: &[f64]) -> bool {
    let parts = node.parts();
    (0..parts.len().saturating_sub(1)).all(|i| {
        let lo = parts[i].iter().map(|a| x[a - 1]).fold(f64::INFINITY, f64::min);
        let hi = parts[i + 1].iter().map(|a| x[a - 1]).fold(f64::NEG_INFINITY, f64::max);
        lo >= hi
    })
}

/// Points within `eps` in sup-norm map to nodes at tree distance <= 1, and
/// every output is weakly obeyed by its input.
pub fn verify_stability(trials: usize, max_k: usize, max_m: usize, seed: u64) -> VerifyReport {
    let mut rep = VerifyReport::new(Suite::Stability);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let tr = random_trial(max_k, max_m, &mut rng);
        let y = perturb(&tr.x, tr.eps, &mut rng);
        let px = assign_unchecked(&tr.x, tr.eps, tr.m, &tr.c);
        let py = assign_unchecked(&y, tr.eps, tr.m, &tr.c);
        rep.record(is_adjacent(&px, &py), || {
            format!("m={} eps={} c={:?} x={:?} -> {px}, y={y:?} -> {py}", tr.m, tr.eps, tr.c.values(), tr.x)
        });
        rep.record(obeys_all(&px, &tr.x) && obeys_all(&py, &y), || {
            format!("output does not respect its input: x={:?} -> {px}, y={y:?} -> {py}", tr.x)
        });
    }
    rep
}

/// Deepest common ancestor of two nodes.
pub fn common_ancestor(a: &Dop, b: &Dop) -> Dop {
    let ca = a.ancestors();
    let cb = b.ancestors();
    ca.into_iter()
        .zip(cb)
        .take_while(|(x, y)| x == y)
        .last()
        .map(|(x, _)| x)
        .expect("both chains start at the root")
}

/// Runs with `eps` on `x` and `eps' <= eps` on `y`, where `y` agrees with `x`
/// within `eps` on most coordinates. Whenever they agree on `A(P) ∪ B(P)` of
/// the deepest common ancestor `P` of the two outputs, the outputs must lie
/// on one root path (never under two distinct children of `P`).
pub fn verify_consistency(trials: usize, max_k: usize, max_m: usize, seed: u64) -> VerifyReport {
    let mut rep = VerifyReport::new(Suite::Consistency);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while rep.checks < trials as u64 {
        let tr = random_trial(max_k, max_m, &mut rng);
        let eps2 = tr.eps * rng.gen_range(0.05..=1.0);
        let mut y = perturb(&tr.x, tr.eps, &mut rng);
        for v in y.iter_mut() {
            if rng.gen_bool(0.15) {
                *v = rng.gen();
            }
        }
        let px = assign_unchecked(&tr.x, tr.eps, tr.m, &tr.c);
        let py = assign_unchecked(&y, eps2, tr.m, &tr.c);
        let p = common_ancestor(&px, &py);
        let ds = p.decided_unchecked(tr.m);
        let agree = ds.a_set.union(ds.b_set).iter().all(|a| (tr.x[a - 1] - y[a - 1]).abs() <= tr.eps);
        if !agree {
            continue;
        }
        let nested = px.is_ancestor_of(&py) || py.is_ancestor_of(&px);
        rep.record(nested, || {
            format!(
                "m={} eps={} eps'={eps2} c={:?} x={:?} -> {px}, y={y:?} -> {py}, split under {p}",
                tr.m,
                tr.eps,
                tr.c.values(),
                tr.x
            )
        });
    }
    rep
}

/// For random non-leaf nodes the widest prefix cut of the sorted block is at
/// least `range / K`, with no tolerance.
pub fn verify_cut_lemma(trials: usize, max_k: usize, seed: u64) -> Result<VerifyReport> {
    let mut rep = VerifyReport::new(Suite::CutLemma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let k = rng.gen_range(2..=max_k);
        let m = rng.gen_range(1..k);
        let x: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let mut node = Dop::root(k)?;
        loop {
            if !rng.gen_bool(0.6) {
                break;
            }
            let kids: Vec<Dop> = node.children(m)?.into_iter().filter(|c| !c.decided_unchecked(m).is_leaf).collect();
            match kids.choose(&mut rng) {
                Some(c) => node = c.clone(),
                None => break,
            }
        }
        let range = range_of(&node, &x, m)?;
        let (child, gap) = best_cut_child(&node, &x, m)?;
        let recomputed = gap_of(&child, &x)?;
        rep.record(gap >= range / k as f64 && gap >= 0.0 && recomputed == gap, || {
            format!("K={k} m={m} {node} x={x:?}: gap {gap} < range {range} / {k}")
        });
    }
    Ok(rep)
}

/// Runs a suite with its default parameters.
pub fn run_suite(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let budget = OracleBudget::default();
    match suite {
        Suite::Feas => verify_feas(&FEAS_GRID, &budget),
        Suite::Coloring => verify_coloring(&COLORING_GRID, 100, seed, &budget),
        Suite::Stability => Ok(verify_stability(10_000, 5, 3, seed)),
        Suite::Consistency => Ok(verify_consistency(10_000, 5, 3, seed)),
        Suite::CutLemma => verify_cut_lemma(10_000, 6, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_runs_pass() {
        let b = OracleBudget::default();
        assert!(verify_feas(&[(3, 2), (4, 2)], &b).unwrap().passed());
        assert!(verify_coloring(&[(3, 2)], 10, 1, &b).unwrap().passed());
        assert!(verify_stability(500, 4, 2, 1).passed());
        assert!(verify_consistency(500, 4, 2, 1).passed());
        assert!(verify_cut_lemma(500, 5, 1).unwrap().passed());
    }

    #[test]
    fn common_ancestor_of_siblings_is_parent() {
        let a = Dop::parse("[{1}>_1{2}>_2{3}]", 3).unwrap();
        let b = Dop::parse("[{1}>_1{3}>_2{2}]", 3).unwrap();
        assert_eq!(common_ancestor(&a, &b).to_string(), "[{1}>_1{2,3}]");
        assert_eq!(common_ancestor(&a, &a), a);
    }

    #[test]
    fn coloring_check_detects_a_bad_coloring() {
        assert!(!is_robust_pair(
            &crate::coloring::ColorTuple { slots: vec![1, 2] },
            &crate::coloring::ColorTuple { slots: vec![3, 1] }
        ));
    }
}

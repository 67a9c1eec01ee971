//! Brute-force references, independent of the tree and partition code they
//! cross-check.

use itertools::Itertools;

use crate::armset::{Arm, ArmSet};
use crate::dop::{enumerate_tree, Dop};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_permutations: u64,
    pub max_nodes: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_permutations: 40_320,
            max_nodes: 1_000_000,
        }
    }
}

fn factorial(n: usize) -> Option<u64> {
    (1..=n as u64).try_fold(1u64, |acc, i| acc.checked_mul(i))
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    (0..k as u64).try_fold(1u64, |acc, i| acc.checked_mul(n as u64 - i).map(|v| v / (i + 1)))
}

/// Collects the top-`m` sets of every total order of the arms that respects
/// each inequality of `d`.
pub fn feas_by_enumeration(d: &Dop, m: usize, budget: &OracleBudget) -> Result<Vec<ArmSet>> {
    let k = d.arm_count();
    if m == 0 || m > k {
        return Err(Error::InvalidParameter(format!("m = {m} must satisfy 1 <= m <= K = {k}")));
    }
    match factorial(k) {
        Some(n) if n <= budget.max_permutations => {}
        _ => return Err(Error::BudgetExceeded(format!("{k}! total orders exceed the permutation budget"))),
    }
    // Part index of every arm; a total order extends `d` iff part indices
    // never decrease along it.
    let mut part_of = vec![0usize; k + 1];
    for (i, part) in d.parts().iter().enumerate() {
        for a in part.iter() {
            part_of[a] = i;
        }
    }
    let mut found: Vec<ArmSet> = (1..=k)
        .permutations(k)
        .filter(|order: &Vec<Arm>| order.windows(2).all(|w| part_of[w[0]] <= part_of[w[1]]))
        .map(|order| order[..m].iter().collect())
        .collect();
    found.sort();
    found.dedup();
    Ok(found)
}

/// Maximum of `sum p(i)` over every `m`-subset.
pub fn top_m_bruteforce(means: &[f64], m: usize) -> Result<f64> {
    match binomial(means.len(), m) {
        Some(n) if n <= 1_000_000 => {}
        _ => return Err(Error::BudgetExceeded(format!("C({}, {m}) subsets exceed 10^6", means.len()))),
    }
    Ok((0..means.len())
        .combinations(m)
        .map(|subset| subset.iter().map(|&i| means[i]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `(nodes, leaves)` of the top-`m` tree over `K` arms.
pub fn count_tree(arm_count: usize, m: usize, budget: &OracleBudget) -> Result<(usize, usize)> {
    let nodes = enumerate_tree(arm_count, m, budget.max_nodes)?;
    let leaves = nodes.iter().filter(|n| n.decided_unchecked(m).is_leaf).count();
    Ok((nodes.len(), leaves))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feas_oracle_examples() {
        let b = OracleBudget::default();
        let d = Dop::parse("[{1}>_1{2,3}]", 3).unwrap();
        let want: Vec<ArmSet> = vec![[1, 2].iter().collect(), [1, 3].iter().collect()];
        assert_eq!(feas_by_enumeration(&d, 2, &b).unwrap(), want);

        let leaf = Dop::parse("[{2,3}>_1{1}]", 3).unwrap();
        assert_eq!(feas_by_enumeration(&leaf, 2, &b).unwrap(), vec![[2, 3].iter().collect::<ArmSet>()]);

        assert_eq!(feas_by_enumeration(&Dop::root(5).unwrap(), 2, &b).unwrap().len(), 10);
        assert!(matches!(
            feas_by_enumeration(&Dop::root(9).unwrap(), 2, &b),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn top_m_oracle_examples() {
        assert!((top_m_bruteforce(&[0.9, 0.5, 0.1], 2).unwrap() - 1.4).abs() < 1e-15);
        assert_eq!(top_m_bruteforce(&[0.25, 0.5, 0.125], 3).unwrap(), 0.875);
    }

    #[test]
    fn tree_counts() {
        let b = OracleBudget::default();
        assert_eq!(count_tree(3, 2, &b).unwrap(), (13, 9));
        assert_eq!(count_tree(2, 1, &b).unwrap(), (3, 2));
        for k in 1..=6 {
            assert_eq!(count_tree(k, k, &b).unwrap(), (1, 1));
        }
    }
}

//! Collision-robust `m`-coloring of the top-`m` tree.
//!
//! Each node gets an `m`-tuple of distinct arms; slot `i` is the arm player
//! `i + 1` plays there. Colors are computed along the root-to-node chain, so
//! every player can evaluate them independently and agree.

use crate::armset::{Arm, ArmSet};
use crate::dop::Dop;
use crate::error::{invalid, Result};

/// A total order on arms, given by a rank bijection `arm -> 1..=K`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArmOrder {
    /// `rank[a - 1]` is the rank of arm `a`.
    rank: Vec<usize>,
}

impl ArmOrder {
    pub fn identity(arm_count: usize) -> ArmOrder {
        ArmOrder {
            rank: (1..=arm_count).collect(),
        }
    }

    /// From ranks indexed by arm (`ranks[a - 1]` is arm `a`'s rank).
    pub fn from_ranks(ranks: Vec<usize>) -> Result<ArmOrder> {
        let n = ranks.len();
        let mut seen = vec![false; n + 1];
        for &r in &ranks {
            if r == 0 || r > n || seen[r] {
                return Err(invalid(format!("ranks {ranks:?} are not a bijection onto 1..={n}")));
            }
            seen[r] = true;
        }
        Ok(ArmOrder { rank: ranks })
    }

    /// From arms listed smallest-rank first.
    pub fn from_sequence(arms: &[Arm]) -> Result<ArmOrder> {
        let mut ranks = vec![0; arms.len()];
        for (i, &a) in arms.iter().enumerate() {
            if a == 0 || a > arms.len() || ranks[a - 1] != 0 {
                return Err(invalid(format!("{arms:?} is not a permutation of the arms")));
            }
            ranks[a - 1] = i + 1;
        }
        Ok(ArmOrder { rank: ranks })
    }

    pub fn arm_count(&self) -> usize {
        self.rank.len()
    }

    pub fn rank(&self, arm: Arm) -> usize {
        self.rank[arm - 1]
    }

    /// Arms of `set` sorted by ascending rank.
    pub fn sorted(&self, set: ArmSet) -> Vec<Arm> {
        let mut arms = set.to_vec();
        arms.sort_by_key(|&a| self.rank(a));
        arms
    }
}

/// The per-node action tuple; `slots[i]` is played by player `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ColorTuple {
    pub slots: Vec<Arm>,
}

impl ColorTuple {
    pub fn arm_for(&self, player: usize) -> Arm {
        self.slots[player - 1]
    }

    pub fn as_set(&self) -> ArmSet {
        self.slots.iter().collect()
    }
}

fn check_order(d: &Dop, order: &ArmOrder) -> Result<()> {
    if order.arm_count() != d.arm_count() {
        return Err(invalid(format!(
            "order covers {} arms, DOP has {}",
            order.arm_count(),
            d.arm_count()
        )));
    }
    Ok(())
}

/// First element of Feas under `order`: `A(d)` plus the lowest-ranked arms
/// of `B(d)`.
pub fn feas_first(d: &Dop, m: usize, order: &ArmOrder) -> Result<ArmSet> {
    check_order(d, order)?;
    let ds = d.decided_sets(m)?;
    let need = m - ds.a_set.len();
    Ok(order
        .sorted(ds.b_set)
        .into_iter()
        .take(need)
        .fold(ds.a_set, |acc, a| acc.union(ArmSet::singleton(a))))
}

/// Color of `d`: the root takes its Feas-first set in rank order; every child
/// keeps each parent slot whose arm it still uses and hands its remaining
/// arms, in rank order, to the free slots in slot order.
pub fn color_of(d: &Dop, m: usize, order: &ArmOrder) -> Result<ColorTuple> {
    check_order(d, order)?;
    d.decided_sets(m)?;
    let chain = d.ancestors();
    let mut slots = order.sorted(feas_first(&chain[0], m, order)?);
    for node in &chain[1..] {
        let target = feas_first(node, m, order)?;
        let kept: ArmSet = slots.iter().copied().filter(|&a| target.contains(a)).collect();
        let mut fill = order.sorted(target.difference(kept)).into_iter();
        for slot in slots.iter_mut() {
            if !target.contains(*slot) {
                *slot = fill.next().expect("free slots match unused arms");
            }
        }
    }
    Ok(ColorTuple { slots })
}

/// No arm appears at different slots of the two colors.
pub fn is_robust_pair(a: &ColorTuple, b: &ColorTuple) -> bool {
    a.slots
        .iter()
        .enumerate()
        .all(|(i, arm)| b.slots.iter().enumerate().all(|(j, other)| arm != other || i == j))
}

/// Checks the collision-robust condition for a pair of nodes.
pub fn check_robust(p: &Dop, q: &Dop, m: usize, order: &ArmOrder) -> Result<bool> {
    Ok(is_robust_pair(&color_of(p, m, order)?, &color_of(q, m, order)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dop::{enumerate_tree, DEFAULT_NODE_CAP};

    fn d(text: &str, k: usize) -> Dop {
        Dop::parse(text, k).unwrap()
    }

    fn set(arms: &[Arm]) -> ArmSet {
        arms.iter().collect()
    }

    #[test]
    fn feas_first_examples() {
        let id = ArmOrder::identity(3);
        let root = Dop::root(3).unwrap();
        assert_eq!(feas_first(&root, 2, &id).unwrap(), set(&[1, 2]));
        assert_eq!(feas_first(&d("[{1}>_1{2,3}]", 3), 2, &id).unwrap(), set(&[1, 2]));
        let order = ArmOrder::from_sequence(&[2, 3, 1]).unwrap();
        assert_eq!(feas_first(&root, 2, &order).unwrap(), set(&[2, 3]));
    }

    #[test]
    fn color_examples() {
        let id = ArmOrder::identity(3);
        let root = Dop::root(3).unwrap();
        assert_eq!(color_of(&root, 2, &id).unwrap().slots, vec![1, 2]);
        assert_eq!(color_of(&d("[{2,3}>_1{1}]", 3), 2, &id).unwrap().slots, vec![3, 2]);
        assert_eq!(color_of(&d("[{1}>_1{2,3}]", 3), 2, &id).unwrap().slots, vec![1, 2]);
    }

    #[test]
    fn robustness_examples() {
        let id = ArmOrder::identity(3);
        let root = Dop::root(3).unwrap();
        let leaf = d("[{2,3}>_1{1}]", 3);
        assert!(check_robust(&root, &leaf, 2, &id).unwrap());
        assert!(check_robust(&leaf, &leaf, 2, &id).unwrap());
        assert!(!is_robust_pair(
            &ColorTuple { slots: vec![1, 2] },
            &ColorTuple { slots: vec![2, 1] }
        ));
    }

    #[test]
    fn rank_order_reaches_root_color() {
        let order = ArmOrder::from_sequence(&[3, 1, 2]).unwrap();
        assert_eq!(color_of(&Dop::root(3).unwrap(), 2, &order).unwrap().slots, vec![3, 1]);
    }

    #[test]
    fn order_validation() {
        assert!(ArmOrder::from_ranks(vec![1, 1, 2]).is_err());
        assert!(ArmOrder::from_sequence(&[1, 4, 2]).is_err());
        assert_eq!(ArmOrder::from_ranks(vec![3, 1, 2]).unwrap().sorted(ArmSet::full(3)), vec![2, 3, 1]);
    }

    #[test]
    fn retention_on_every_edge() {
        for (k, m) in [(3, 2), (4, 2), (4, 3), (5, 3)] {
            let id = ArmOrder::identity(k);
            for node in enumerate_tree(k, m, DEFAULT_NODE_CAP).unwrap() {
                let pc = color_of(&node, m, &id).unwrap();
                assert_eq!(pc.as_set(), feas_first(&node, m, &id).unwrap());
                for child in node.children(m).unwrap() {
                    let cc = color_of(&child, m, &id).unwrap();
                    let g = feas_first(&child, m, &id).unwrap();
                    for (i, &a) in pc.slots.iter().enumerate() {
                        if g.contains(a) {
                            assert_eq!(cc.slots[i], a);
                        }
                    }
                }
            }
        }
    }
}

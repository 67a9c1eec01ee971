//! Doubly-ordered partitions (DOPs) and the virtual tree of DOPs that pins
//! down the top-`m` arms.
//!
//! A DOP is an ordered set partition `S_1 > S_2 > ... > S_j` of the arms
//! `{1..K}` whose inequality signs carry labels `1..j-1` recording the order
//! in which they were introduced. The tree is never materialized: parent and
//! children are computed from the node itself.

use std::collections::VecDeque;
use std::fmt;

use itertools::Itertools;

use crate::armset::{Arm, ArmSet, MAX_ARMS};
use crate::error::{invalid, Error, Result};

/// Default cap on the number of nodes [`enumerate_tree`] may produce.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dop {
    arm_count: usize,
    parts: Vec<ArmSet>,
    /// `sign_order[i]` labels the inequality between `parts[i]` and `parts[i + 1]`.
    sign_order: Vec<usize>,
}

/// The arms a node has already placed in the top `m` (`a_set`) and the block
/// still to be split (`b_set`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecidedSets {
    pub i_p: usize,
    pub a_set: ArmSet,
    pub b_set: ArmSet,
    pub is_leaf: bool,
}

fn check_m(arm_count: usize, m: usize) -> Result<()> {
    if m == 0 || m > arm_count {
        return Err(invalid(format!("m = {m} must satisfy 1 <= m <= K = {arm_count}")));
    }
    Ok(())
}

impl Dop {
    /// The trivial DOP `[{1..K}]`.
    pub fn root(arm_count: usize) -> Result<Dop> {
        if arm_count == 0 || arm_count > MAX_ARMS {
            return Err(invalid(format!("K = {arm_count} must be in 1..={MAX_ARMS}")));
        }
        Ok(Dop {
            arm_count,
            parts: vec![ArmSet::full(arm_count)],
            sign_order: Vec::new(),
        })
    }

    /// Builds a DOP from its parts and inequality labels, checking every
    /// structural invariant.
    pub fn new(arm_count: usize, parts: Vec<ArmSet>, sign_order: Vec<usize>) -> Result<Dop> {
        if arm_count == 0 || arm_count > MAX_ARMS {
            return Err(invalid(format!("K = {arm_count} must be in 1..={MAX_ARMS}")));
        }
        if parts.is_empty() {
            return Err(invalid("a DOP needs at least one part"));
        }
        let full = ArmSet::full(arm_count);
        let mut seen = ArmSet::EMPTY;
        for part in &parts {
            if part.is_empty() {
                return Err(invalid("parts must be nonempty"));
            }
            if !part.is_subset(full) {
                return Err(invalid(format!("part {part} has arms outside 1..={arm_count}")));
            }
            if !part.is_disjoint(seen) {
                return Err(invalid(format!("part {part} overlaps an earlier part")));
            }
            seen = seen.union(*part);
        }
        if seen != full {
            return Err(invalid(format!(
                "parts miss arms {}",
                full.difference(seen)
            )));
        }
        if sign_order.len() + 1 != parts.len() {
            return Err(invalid(format!(
                "{} parts need {} inequality labels, got {}",
                parts.len(),
                parts.len() - 1,
                sign_order.len()
            )));
        }
        if !is_permutation(&sign_order) {
            return Err(invalid(format!(
                "inequality labels {sign_order:?} are not a permutation of 1..={}",
                sign_order.len()
            )));
        }
        Ok(Dop {
            arm_count,
            parts,
            sign_order,
        })
    }

    /// Parses the bracket notation, e.g. `[{1,3,5}>_1{2,6,7}>_2{4}]`.
    pub fn parse(text: &str, arm_count: usize) -> Result<Dop> {
        let (parts, signs) = Parser::new(text).dop()?;
        Dop::new(arm_count, parts, signs).map_err(|e| Error::Parse {
            pos: text.len(),
            msg: e.to_string(),
        })
    }

    pub fn arm_count(&self) -> usize {
        self.arm_count
    }

    pub fn parts(&self) -> &[ArmSet] {
        &self.parts
    }

    pub fn sign_order(&self) -> &[usize] {
        &self.sign_order
    }

    pub fn is_root(&self) -> bool {
        self.parts.len() == 1
    }

    /// Number of inequalities, which is also the distance to the root.
    pub fn depth(&self) -> usize {
        self.sign_order.len()
    }

    pub fn decided_sets(&self, m: usize) -> Result<DecidedSets> {
        check_m(self.arm_count, m)?;
        Ok(self.decided_unchecked(m))
    }

    pub(crate) fn decided_unchecked(&self, m: usize) -> DecidedSets {
        let mut a_set = ArmSet::EMPTY;
        let mut i_p = 0;
        for part in &self.parts {
            if a_set.len() + part.len() > m {
                break;
            }
            a_set = a_set.union(*part);
            i_p += 1;
        }
        let is_leaf = a_set.len() == m;
        let b_set = if is_leaf { ArmSet::EMPTY } else { self.parts[i_p] };
        DecidedSets {
            i_p,
            a_set,
            b_set,
            is_leaf,
        }
    }

    pub fn is_leaf(&self, m: usize) -> Result<bool> {
        Ok(self.decided_sets(m)?.is_leaf)
    }

    /// Position `i` of the most recent inequality, which sits between
    /// `parts[i]` and `parts[i + 1]`.
    pub fn last_sign_index(&self) -> Option<usize> {
        self.sign_order.iter().position_max()
    }

    /// Removes the highest-labelled inequality and merges its flanking parts.
    pub fn parent(&self) -> Result<Dop> {
        let i = self.last_sign_index().ok_or(Error::NoParent)?;
        let mut parts = self.parts.clone();
        let lower = parts.remove(i + 1);
        parts[i] = parts[i].union(lower);
        let mut sign_order = self.sign_order.clone();
        sign_order.remove(i);
        Ok(Dop {
            arm_count: self.arm_count,
            parts,
            sign_order,
        })
    }

    /// Splits the undecided block into `upper > (B \ upper)` with the next
    /// inequality label. `upper` must be a nonempty proper subset of B.
    pub(crate) fn split_block(&self, b_index: usize, upper: ArmSet) -> Dop {
        let block = self.parts[b_index];
        debug_assert!(upper.is_subset(block) && !upper.is_empty() && upper != block);
        let mut parts = Vec::with_capacity(self.parts.len() + 1);
        parts.extend_from_slice(&self.parts[..b_index]);
        parts.push(upper);
        parts.push(block.difference(upper));
        parts.extend_from_slice(&self.parts[b_index + 1..]);
        let mut sign_order = Vec::with_capacity(self.sign_order.len() + 1);
        sign_order.extend_from_slice(&self.sign_order[..b_index]);
        sign_order.push(self.sign_order.len() + 1);
        sign_order.extend_from_slice(&self.sign_order[b_index..]);
        Dop {
            arm_count: self.arm_count,
            parts,
            sign_order,
        }
    }

    /// Children in the top-`m` tree: every ordered split of B into two
    /// nonempty sets, ordered by upper-part size and then lexicographically.
    pub fn children(&self, m: usize) -> Result<Vec<Dop>> {
        let ds = self.decided_sets(m)?;
        if ds.is_leaf {
            return Ok(Vec::new());
        }
        let block = ds.b_set.to_vec();
        let mut out = Vec::with_capacity((1usize << block.len().min(20)).saturating_sub(2));
        for size in 1..block.len() {
            for upper in block.iter().copied().combinations(size) {
                out.push(self.split_block(ds.i_p, upper.iter().collect()));
            }
        }
        Ok(out)
    }

    /// Whether `self` is an ancestor of (or equal to) `other`.
    pub fn is_ancestor_of(&self, other: &Dop) -> bool {
        if self.arm_count != other.arm_count || self.depth() > other.depth() {
            return false;
        }
        let mut cur = other.clone();
        while cur.depth() > self.depth() {
            cur = cur.parent().expect("non-root has a parent");
        }
        cur == *self
    }

    /// Root-to-self chain of ancestors, inclusive at both ends.
    pub fn ancestors(&self) -> Vec<Dop> {
        let mut chain = Vec::with_capacity(self.depth() + 1);
        let mut cur = self.clone();
        while let Ok(p) = cur.parent() {
            chain.push(cur);
            cur = p;
        }
        chain.push(cur);
        chain.reverse();
        chain
    }

    /// True iff every inequality on the path from the root was introduced by
    /// splitting exactly the undecided block of its parent.
    pub fn is_member(&self, m: usize) -> Result<bool> {
        check_m(self.arm_count, m)?;
        let mut cur = self.clone();
        while let Some(i) = cur.last_sign_index() {
            let parent = cur.parent()?;
            let ds = parent.decided_unchecked(m);
            if ds.is_leaf || ds.i_p != i {
                return Ok(false);
            }
            cur = parent;
        }
        Ok(true)
    }

    /// The `m`-subsets that can be the top `m` under some total order
    /// extending this DOP, in ascending bitmask order.
    pub fn feas(&self, m: usize) -> Result<Vec<ArmSet>> {
        let ds = self.decided_sets(m)?;
        if ds.is_leaf {
            return Ok(vec![ds.a_set]);
        }
        let need = m - ds.a_set.len();
        let mut out: Vec<ArmSet> = ds
            .b_set
            .iter()
            .combinations(need)
            .map(|pick| ds.a_set.union(pick.iter().collect()))
            .collect();
        out.sort();
        Ok(out)
    }

    /// Applies an arm relabelling: arm `a` becomes `sigma[a - 1]`.
    pub fn relabel(&self, sigma: &[Arm]) -> Result<Dop> {
        if sigma.len() != self.arm_count {
            return Err(invalid("relabelling must cover every arm"));
        }
        let parts = self
            .parts
            .iter()
            .map(|p| p.iter().map(|a| sigma[a - 1]).collect())
            .collect();
        Dop::new(self.arm_count, parts, self.sign_order.clone())
    }
}

fn is_permutation(labels: &[usize]) -> bool {
    let n = labels.len();
    let mut seen = vec![false; n + 1];
    for &l in labels {
        if l == 0 || l > n || seen[l] {
            return false;
        }
        seen[l] = true;
    }
    true
}

/// Whether two nodes are at tree distance at most one.
pub fn is_adjacent(p: &Dop, q: &Dop) -> bool {
    if p == q {
        return true;
    }
    match p.depth().cmp(&q.depth()) {
        std::cmp::Ordering::Less => q.parent().map(|pq| pq == *p).unwrap_or(false),
        std::cmp::Ordering::Greater => p.parent().map(|pp| pp == *q).unwrap_or(false),
        std::cmp::Ordering::Equal => false,
    }
}

/// Breadth-first list of every node of the top-`m` tree over `K` arms.
pub fn enumerate_tree(arm_count: usize, m: usize, cap: usize) -> Result<Vec<Dop>> {
    let root = Dop::root(arm_count)?;
    check_m(arm_count, m)?;
    let mut out = Vec::new();
    let mut queue = VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        if out.len() + queue.len() + 1 > cap {
            return Err(Error::TooLarge { cap });
        }
        queue.extend(node.children(m)?);
        out.push(node);
    }
    Ok(out)
}

impl fmt::Display for Dop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, part) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ">_{}", self.sign_order[i - 1])?;
            }
            write!(f, "{part}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for Dop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, tok: &str) -> Result<()> {
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            Ok(())
        } else {
            Err(self.err(format!("expected `{tok}`")))
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn int(&mut self) -> Result<usize> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let value: usize = digits.parse().map_err(|_| Error::Parse {
            pos: start,
            msg: format!("integer `{digits}` out of range"),
        })?;
        if value == 0 {
            return Err(Error::Parse {
                pos: start,
                msg: "integers must be >= 1".into(),
            });
        }
        Ok(value)
    }

    fn part(&mut self) -> Result<ArmSet> {
        self.expect("{")?;
        let mut set = ArmSet::EMPTY;
        loop {
            let at = self.pos;
            let arm = self.int()?;
            if arm > MAX_ARMS {
                return Err(Error::Parse {
                    pos: at,
                    msg: format!("arm {arm} exceeds {MAX_ARMS}"),
                });
            }
            if set.contains(arm) {
                return Err(Error::Parse {
                    pos: at,
                    msg: format!("arm {arm} repeated"),
                });
            }
            set.insert(arm);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(set);
                }
                _ => return Err(self.err("expected `,` or `}`")),
            }
        }
    }

    fn dop(mut self) -> Result<(Vec<ArmSet>, Vec<usize>)> {
        self.expect("[")?;
        let mut parts = vec![self.part()?];
        let mut signs = Vec::new();
        while self.peek() == Some(b'>') {
            self.expect(">_")?;
            signs.push(self.int()?);
            parts.push(self.part()?);
        }
        self.expect("]")?;
        if self.pos != self.src.len() {
            return Err(self.err("trailing input"));
        }
        Ok((parts, signs))
    }
}

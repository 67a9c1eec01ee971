use std::fmt;

/// One-based arm identifier.
pub type Arm = usize;

/// Largest supported ground set.
pub const MAX_ARMS: usize = 64;

/// A set of arms stored as a bitmask; bit `i - 1` holds arm `i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ArmSet(u64);

impl ArmSet {
    pub const EMPTY: ArmSet = ArmSet(0);

    /// The full set `{1..k}`.
    pub fn full(k: usize) -> ArmSet {
        debug_assert!(k <= MAX_ARMS);
        if k == MAX_ARMS {
            ArmSet(u64::MAX)
        } else {
            ArmSet((1u64 << k) - 1)
        }
    }

    pub fn singleton(arm: Arm) -> ArmSet {
        debug_assert!((1..=MAX_ARMS).contains(&arm));
        ArmSet(1u64 << (arm - 1))
    }

    pub fn from_bits(bits: u64) -> ArmSet {
        ArmSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, arm: Arm) -> bool {
        (1..=MAX_ARMS).contains(&arm) && self.0 & (1u64 << (arm - 1)) != 0
    }

    pub fn insert(&mut self, arm: Arm) {
        self.0 |= ArmSet::singleton(arm).0;
    }

    pub fn union(self, other: ArmSet) -> ArmSet {
        ArmSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ArmSet) -> ArmSet {
        ArmSet(self.0 & other.0)
    }

    pub fn difference(self, other: ArmSet) -> ArmSet {
        ArmSet(self.0 & !other.0)
    }

    pub fn is_disjoint(self, other: ArmSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: ArmSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Arms in ascending order.
    pub fn iter(self) -> Arms {
        Arms(self.0)
    }

    pub fn to_vec(self) -> Vec<Arm> {
        self.iter().collect()
    }
}

impl FromIterator<Arm> for ArmSet {
    fn from_iter<I: IntoIterator<Item = Arm>>(iter: I) -> Self {
        let mut s = ArmSet::EMPTY;
        for a in iter {
            s.insert(a);
        }
        s
    }
}

impl<'a> FromIterator<&'a Arm> for ArmSet {
    fn from_iter<I: IntoIterator<Item = &'a Arm>>(iter: I) -> Self {
        iter.into_iter().copied().collect()
    }
}

impl IntoIterator for ArmSet {
    type Item = Arm;
    type IntoIter = Arms;

    fn into_iter(self) -> Arms {
        self.iter()
    }
}

/// Ascending iterator over the arms of an [`ArmSet`].
#[derive(Clone, Debug)]
pub struct Arms(u64);

impl Iterator for Arms {
    type Item = Arm;

    fn next(&mut self) -> Option<Arm> {
        if self.0 == 0 {
            return None;
        }
        let low = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(low + 1)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Arms {}

impl fmt::Display for ArmSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for ArmSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

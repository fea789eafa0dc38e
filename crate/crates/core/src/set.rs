//! Small sets of goods as bitmasks.
//!
//! Instances index goods contiguously from zero, and everything downstream
//! (demand oracles, brute-force search, subset checks) enumerates subsets,
//! so a `u64` mask capped at [`MAX_GOODS`] bits is the natural carrier.

use core::cmp::Ordering;
use core::fmt;

use crate::GoodId;

/// Hard cap on goods per instance; keeps `2^M` subset enumerations sane.
pub const MAX_GOODS: usize = 20;

/// A set of good ids, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GoodSet(u64);

impl GoodSet {
    pub const EMPTY: GoodSet = GoodSet(0);

    /// The full set `{0, .., m-1}`.
    pub fn full(m: usize) -> Self {
        debug_assert!(m <= MAX_GOODS);
        GoodSet(if m == 0 { 0 } else { (1u64 << m) - 1 })
    }

    pub fn singleton(g: GoodId) -> Self {
        debug_assert!(g < MAX_GOODS);
        GoodSet(1u64 << g)
    }

    pub fn from_iter<I: IntoIterator<Item = GoodId>>(iter: I) -> Self {
        let mut s = GoodSet::EMPTY;
        for g in iter {
            s.insert(g);
        }
        s
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, g: GoodId) -> bool {
        debug_assert!(g < MAX_GOODS);
        self.0 & (1u64 << g) != 0
    }

    pub fn insert(&mut self, g: GoodId) {
        debug_assert!(g < MAX_GOODS);
        self.0 |= 1u64 << g;
    }

    pub fn remove(&mut self, g: GoodId) {
        debug_assert!(g < MAX_GOODS);
        self.0 &= !(1u64 << g);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: GoodSet) -> GoodSet {
        GoodSet(self.0 | other.0)
    }

    pub fn intersect(self, other: GoodSet) -> GoodSet {
        GoodSet(self.0 & other.0)
    }

    pub fn minus(self, other: GoodSet) -> GoodSet {
        GoodSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: GoodSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Ascending iterator over member ids.
    pub fn iter(self) -> impl Iterator<Item = GoodId> {
        let mut rest = self.0;
        core::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let g = rest.trailing_zeros() as GoodId;
                rest &= rest - 1;
                Some(g)
            }
        })
    }

    /// All subsets of `self`, in ascending numeric (mask) order, starting
    /// with the empty set and ending with `self`.
    pub fn subsets(self) -> impl Iterator<Item = GoodSet> {
        let mask = self.0;
        let mut next = Some(0u64);
        core::iter::from_fn(move || {
            let cur = next?;
            next = if cur == mask {
                None
            } else {
                Some((cur.wrapping_sub(mask)) & mask)
            };
            Some(GoodSet(cur))
        })
    }

    /// Lexicographic comparison of the ascending id sequences. This is the
    /// tie-break order used by the demand oracle; it differs from the raw
    /// mask order (e.g. `{0,3}` precedes `{1,2}` here but not numerically).
    pub fn lex_cmp(self, other: GoodSet) -> Ordering {
        let (mut a, mut b) = (self.0, other.0);
        loop {
            if a == b {
                return Ordering::Equal;
            }
            if a == 0 {
                return Ordering::Less; // proper prefix
            }
            if b == 0 {
                return Ordering::Greater;
            }
            let (la, lb) = (a.trailing_zeros(), b.trailing_zeros());
            match la.cmp(&lb) {
                Ordering::Equal => {
                    a &= a - 1;
                    b &= b - 1;
                }
                ord => return ord,
            }
        }
    }
}

impl fmt::Debug for GoodSet {
    /// Renders as `{1, 2, 4}` in reports and assertion messages.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, g) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", g)?;
        }
        write!(f, "}}")
    }
}

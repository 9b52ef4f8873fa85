//! Fixed-width node sets.
//!
//! Every set of nodes in the toolkit is a single `u64` word plus the size of
//! the universe it lives in. Universes are therefore capped at
//! [`MAX_NODES`] nodes, which keeps union, intersection and subset tests to
//! one machine instruction each.

use std::fmt;

use crate::error::Error;

/// Largest supported universe.
pub const MAX_NODES: usize = 64;

/// A set of node indices drawn from `0..universe_size`.
///
/// Iteration is always in ascending index order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet {
    bits: u64,
    universe: u8,
}

#[inline]
pub(crate) fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl NodeSet {
    /// The empty set over a universe of `n` nodes.
    pub fn empty(n: usize) -> Result<Self, Error> {
        check_universe(n)?;
        Ok(NodeSet {
            bits: 0,
            universe: n as u8,
        })
    }

    /// Every node of a universe of `n` nodes.
    pub fn full(n: usize) -> Result<Self, Error> {
        check_universe(n)?;
        Ok(NodeSet {
            bits: full_mask(n),
            universe: n as u8,
        })
    }

    /// Builds a set from node indices. Duplicates are ignored.
    pub fn from_indices<I>(n: usize, indices: I) -> Result<Self, Error>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut set = NodeSet::empty(n)?;
        for idx in indices {
            if idx >= n {
                return Err(Error::IndexOutOfRange {
                    node: None,
                    index: idx,
                    n,
                });
            }
            set.bits |= 1u64 << idx;
        }
        Ok(set)
    }

    /// Builds a set from a raw bit mask. Bits at or above `n` are rejected.
    pub fn from_bits(n: usize, bits: u64) -> Result<Self, Error> {
        check_universe(n)?;
        if bits & !full_mask(n) != 0 {
            let index = 63 - (bits & !full_mask(n)).leading_zeros() as usize;
            return Err(Error::IndexOutOfRange {
                node: None,
                index,
                n,
            });
        }
        Ok(NodeSet {
            bits,
            universe: n as u8,
        })
    }

    // Callers guarantee `bits` fits in the universe.
    #[inline]
    pub(crate) fn from_bits_unchecked(n: usize, bits: u64) -> Self {
        debug_assert!(n <= MAX_NODES && bits & !full_mask(n) == 0);
        NodeSet {
            bits,
            universe: n as u8,
        }
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn universe_size(&self) -> usize {
        self.universe as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        idx < self.universe_size() && self.bits & (1u64 << idx) != 0
    }

    pub fn insert(&mut self, idx: usize) -> Result<(), Error> {
        if idx >= self.universe_size() {
            return Err(Error::IndexOutOfRange {
                node: None,
                index: idx,
                n: self.universe_size(),
            });
        }
        self.bits |= 1u64 << idx;
        Ok(())
    }

    pub fn remove(&mut self, idx: usize) {
        if idx < 64 {
            self.bits &= !(1u64 << idx);
        }
    }

    #[inline]
    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.bits & !other.bits == 0
    }

    #[inline]
    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.bits & other.bits == 0
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            bits: self.bits | other.bits,
            universe: self.universe,
        }
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            bits: self.bits & other.bits,
            universe: self.universe,
        }
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        NodeSet {
            bits: self.bits & !other.bits,
            universe: self.universe,
        }
    }

    /// Complement relative to the universe.
    pub fn complement(&self) -> NodeSet {
        NodeSet {
            bits: !self.bits & full_mask(self.universe_size()),
            universe: self.universe,
        }
    }

    /// Smallest member, if any.
    pub fn first(&self) -> Option<usize> {
        (self.bits != 0).then(|| self.bits.trailing_zeros() as usize)
    }

    pub fn iter(&self) -> Iter {
        Iter { bits: self.bits }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub(crate) fn ensure_universe(&self, n: usize) -> Result<(), Error> {
        if self.universe_size() != n {
            return Err(Error::UniverseMismatch {
                expected: n,
                found: self.universe_size(),
            });
        }
        Ok(())
    }
}

fn check_universe(n: usize) -> Result<(), Error> {
    if n > MAX_NODES {
        return Err(Error::UniverseTooLarge { n, max: MAX_NODES });
    }
    Ok(())
}

/// Ascending iterator over the members of a [`NodeSet`].
#[derive(Clone)]
pub struct Iter {
    bits: u64,
}

impl Iterator for Iter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.bits == 0 {
            return None;
        }
        let idx = self.bits.trailing_zeros() as usize;
        self.bits &= self.bits - 1;
        Some(idx)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.bits.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Iter {}

impl IntoIterator for &NodeSet {
    type Item = usize;
    type IntoIter = Iter;

    fn into_iter(self) -> Iter {
        self.iter()
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

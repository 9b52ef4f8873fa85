//! The federated Byzantine agreement system data model.
//!
//! An [`Fbas`] assigns every node `v` a list of *quorum slices*, each a set
//! of nodes containing `v`. A set `U` is a *quorum* when it is nonempty and
//! every member has at least one slice inside `U`.
//!
//! Slice lists are kept canonical: duplicates are dropped, and so is any
//! slice that strictly contains another slice of the same owner, since such a
//! slice can never be the only witness for a quorum. Canonical slice lists are
//! sorted lexicographically by their ascending index arrays.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nodeset::{full_mask, NodeSet, MAX_NODES};

/// Current version of the FBAS JSON document.
pub const FBAS_JSON_VERSION: u64 = 1;

/// A canonicalized quorum-slice function over nodes `0..n`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Fbas {
    n: usize,
    slices: Vec<Vec<u64>>,
}

/// Builds a canonical [`Fbas`] from raw per-node slice lists.
///
/// `raw_slices[v]` holds the slices of node `v` as lists of node indices.
/// Every slice must include its owner.
pub fn make_fbas(n: usize, raw_slices: &[Vec<Vec<usize>>]) -> Result<Fbas> {
    check_n(n)?;
    if raw_slices.len() != n {
        return Err(Error::SliceCountMismatch {
            expected: n,
            found: raw_slices.len(),
        });
    }
    let mut slices = Vec::with_capacity(n);
    for (v, list) in raw_slices.iter().enumerate() {
        let mut masks = Vec::with_capacity(list.len());
        for slice in list {
            let mut mask = 0u64;
            for &idx in slice {
                if idx >= n {
                    return Err(Error::IndexOutOfRange {
                        node: Some(v),
                        index: idx,
                        n,
                    });
                }
                mask |= 1u64 << idx;
            }
            if mask & (1u64 << v) == 0 {
                return Err(Error::OwnerMissing {
                    node: v,
                    slice: slice.clone(),
                });
            }
            masks.push(mask);
        }
        slices.push(canonicalize(masks));
    }
    Ok(Fbas { n, slices })
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyUniverse);
    }
    if n > MAX_NODES {
        return Err(Error::UniverseTooLarge { n, max: MAX_NODES });
    }
    Ok(())
}

/// Lexicographic order of the ascending index arrays of two masks.
fn lex_cmp(a: u64, b: u64) -> Ordering {
    let diff = a ^ b;
    if diff == 0 {
        return Ordering::Equal;
    }
    let p = diff.trailing_zeros();
    let above = if p == 63 { 0 } else { !((1u64 << (p + 1)) - 1) };
    // The set holding bit p sorts first unless the other one ends before p.
    let (lacks, holder_first) = if a & (1u64 << p) != 0 {
        (b, Ordering::Less)
    } else {
        (a, Ordering::Greater)
    };
    if lacks & above == 0 {
        holder_first.reverse()
    } else {
        holder_first
    }
}

/// Reduces a slice list to its inclusion-minimal members, sorted.
fn canonicalize(mut masks: Vec<u64>) -> Vec<u64> {
    masks.sort_unstable_by_key(|m| (m.count_ones(), *m));
    masks.dedup();
    let mut kept: Vec<u64> = Vec::with_capacity(masks.len());
    // `smaller` marks the end of kept slices with strictly fewer members than
    // the current one; equal-size slices cannot contain each other.
    let mut smaller = 0;
    let mut current_size = 0;
    for m in masks {
        let size = m.count_ones();
        if size != current_size {
            smaller = kept.len();
            current_size = size;
        }
        if !kept[..smaller].iter().any(|&s| s & !m == 0) {
            kept.push(m);
        }
    }
    kept.sort_unstable_by(|&a, &b| lex_cmp(a, b));
    kept
}

impl Fbas {
    /// Builds a canonical system from slices already expressed as node sets.
    pub fn from_node_sets(n: usize, slices: Vec<Vec<NodeSet>>) -> Result<Fbas> {
        check_n(n)?;
        if slices.len() != n {
            return Err(Error::SliceCountMismatch {
                expected: n,
                found: slices.len(),
            });
        }
        let mut out = Vec::with_capacity(n);
        for (v, list) in slices.into_iter().enumerate() {
            let mut masks = Vec::with_capacity(list.len());
            for s in list {
                s.ensure_universe(n)?;
                if !s.contains(v) {
                    return Err(Error::OwnerMissing {
                        node: v,
                        slice: s.to_vec(),
                    });
                }
                masks.push(s.bits());
            }
            out.push(canonicalize(masks));
        }
        Ok(Fbas { n, slices: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical slices of node `v`.
    pub fn slices(&self, v: usize) -> impl ExactSizeIterator<Item = NodeSet> + '_ {
        let n = self.n;
        self.slices[v]
            .iter()
            .map(move |&m| NodeSet::from_bits_unchecked(n, m))
    }

    pub fn slice_count(&self, v: usize) -> usize {
        self.slices[v].len()
    }

    pub fn total_slices(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }

    pub fn all_nodes(&self) -> NodeSet {
        NodeSet::from_bits_unchecked(self.n, full_mask(self.n))
    }

    /// Slice lists as ascending index arrays, in canonical order.
    pub fn to_raw(&self) -> Vec<Vec<Vec<usize>>> {
        (0..self.n)
            .map(|v| self.slices(v).map(|s| s.to_vec()).collect())
            .collect()
    }

    /// Adds one slice to node `v` and re-canonicalizes.
    pub fn with_extra_slice(&self, v: usize, slice: NodeSet) -> Result<Fbas> {
        slice.ensure_universe(self.n)?;
        if v >= self.n {
            return Err(Error::IndexOutOfRange {
                node: None,
                index: v,
                n: self.n,
            });
        }
        if !slice.contains(v) {
            return Err(Error::OwnerMissing {
                node: v,
                slice: slice.to_vec(),
            });
        }
        let mut slices = self.slices.clone();
        slices[v].push(slice.bits());
        slices[v] = canonicalize(std::mem::take(&mut slices[v]));
        Ok(Fbas { n: self.n, slices })
    }

    #[inline]
    pub(crate) fn raw_masks(&self, v: usize) -> &[u64] {
        &self.slices[v]
    }

    #[inline]
    pub(crate) fn has_slice_within(&self, v: usize, mask: u64) -> bool {
        self.slices[v].iter().any(|&s| s & !mask == 0)
    }

    /// Mask form of [`Fbas::greatest_quorum_within`].
    pub(crate) fn closure_mask(&self, mut cur: u64) -> u64 {
        loop {
            let mut changed = false;
            let mut rest = cur;
            while rest != 0 {
                let v = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if !self.has_slice_within(v, cur) {
                    cur &= !(1u64 << v);
                    changed = true;
                }
            }
            if !changed {
                return cur;
            }
        }
    }

    /// Whether `u` is a quorum: nonempty, and each member has a slice inside `u`.
    pub fn is_quorum(&self, u: &NodeSet) -> Result<bool> {
        u.ensure_universe(self.n)?;
        Ok(!u.is_empty() && u.iter().all(|v| self.has_slice_within(v, u.bits())))
    }

    /// The largest quorum contained in `s`, or the empty set when there is none.
    ///
    /// Repeatedly drops members of `s` with no slice inside the surviving set
    /// until nothing changes. Quorums are closed under union, so the fixed
    /// point is the unique maximal quorum inside `s`.
    pub fn greatest_quorum_within(&self, s: &NodeSet) -> Result<NodeSet> {
        s.ensure_universe(self.n)?;
        Ok(NodeSet::from_bits_unchecked(
            self.n,
            self.closure_mask(s.bits()),
        ))
    }

    /// Removes the nodes of `b` from the system and from every remaining slice.
    ///
    /// Surviving nodes are renumbered densely in ascending order of their old
    /// index; the returned [`IndexMap`] translates between the two numberings.
    pub fn delete_nodes(&self, b: &NodeSet) -> Result<(Fbas, IndexMap)> {
        b.ensure_universe(self.n)?;
        let survivors: Vec<usize> = b.complement().to_vec();
        if survivors.is_empty() {
            return Err(Error::DeletedEverything);
        }
        let map = IndexMap::new(self.n, survivors);
        let slices = map
            .survivors
            .iter()
            .map(|&old| canonicalize(self.slices[old].iter().map(|&m| map.compress(m)).collect()))
            .collect();
        let fbas = Fbas {
            n: map.survivors.len(),
            slices,
        };
        Ok((fbas, map))
    }

    /// Serializes to the versioned FBAS JSON document.
    pub fn to_json(&self) -> String {
        let doc = FbasDocument {
            version: FBAS_JSON_VERSION,
            n: self.n,
            slices: self.to_raw(),
        };
        serde_json::to_string(&doc).expect("plain data serializes")
    }

    /// Parses an FBAS JSON document, applying the same validation as [`make_fbas`].
    pub fn from_json(text: &str) -> Result<Fbas> {
        let doc: FbasDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.version != FBAS_JSON_VERSION {
            return Err(Error::UnsupportedVersion(doc.version));
        }
        make_fbas(doc.n, &doc.slices)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FbasDocument {
    version: u64,
    n: usize,
    slices: Vec<Vec<Vec<usize>>>,
}

/// Node renumbering produced by [`Fbas::delete_nodes`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexMap {
    original_n: usize,
    survivors: Vec<usize>,
    to_new: Vec<Option<usize>>,
}

impl IndexMap {
    fn new(original_n: usize, survivors: Vec<usize>) -> Self {
        let mut to_new = vec![None; original_n];
        for (new, &old) in survivors.iter().enumerate() {
            to_new[old] = Some(new);
        }
        IndexMap {
            original_n,
            survivors,
            to_new,
        }
    }

    pub fn original_n(&self) -> usize {
        self.original_n
    }

    /// Old index of each surviving node, indexed by new index.
    pub fn survivors(&self) -> &[usize] {
        &self.survivors
    }

    pub fn to_original(&self, new: usize) -> usize {
        self.survivors[new]
    }

    pub fn to_new(&self, old: usize) -> Option<usize> {
        self.to_new.get(old).copied().flatten()
    }

    fn compress(&self, mask: u64) -> u64 {
        let mut out = 0u64;
        let mut rest = mask;
        while rest != 0 {
            let old = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if let Some(new) = self.to_new[old] {
                out |= 1u64 << new;
            }
        }
        out
    }

    /// Translates a set of surviving nodes back to original indices.
    pub fn lift(&self, s: &NodeSet) -> Result<NodeSet> {
        s.ensure_universe(self.survivors.len())?;
        NodeSet::from_indices(self.original_n, s.iter().map(|i| self.survivors[i]))
    }

    /// Translates an original-index set to the new numbering, dropping deleted nodes.
    pub fn lower(&self, s: &NodeSet) -> Result<NodeSet> {
        s.ensure_universe(self.original_n)?;
        Ok(NodeSet::from_bits_unchecked(
            self.survivors.len(),
            self.compress(s.bits()),
        ))
    }

    /// Composes `self` (applied first) with a later map.
    pub fn then(&self, later: &IndexMap) -> IndexMap {
        let survivors = later
            .survivors
            .iter()
            .map(|&mid| self.survivors[mid])
            .collect();
        IndexMap::new(self.original_n, survivors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(n: usize) -> Fbas {
        let raw: Vec<_> = (0..n).map(|v| vec![vec![v, (v + 1) % n]]).collect();
        make_fbas(n, &raw).unwrap()
    }

    fn set(n: usize, idx: &[usize]) -> NodeSet {
        NodeSet::from_indices(n, idx.iter().copied()).unwrap()
    }

    fn traditional_bft(n: usize) -> Fbas {
        // {v} ∪ S for every S with |S| >= ceil(2n/3).
        let threshold = (2 * n).div_ceil(3);
        let raw: Vec<_> = (0..n)
            .map(|v| {
                (0u64..1 << n)
                    .filter(|m| m.count_ones() as usize >= threshold)
                    .map(|m| {
                        let s = NodeSet::from_bits_unchecked(n, m | 1 << v);
                        s.to_vec()
                    })
                    .collect()
            })
            .collect();
        make_fbas(n, &raw).unwrap()
    }

    #[test]
    fn superset_slices_are_dropped() {
        let raw = vec![
            vec![vec![0, 1], vec![0, 1, 2]],
            vec![vec![1]],
            vec![vec![2]],
        ];
        let f = make_fbas(3, &raw).unwrap();
        assert_eq!(f.to_raw()[0], vec![vec![0, 1]]);
    }

    #[test]
    fn duplicates_and_ordering() {
        let raw = vec![
            vec![vec![0, 2], vec![2, 0], vec![0, 1, 3], vec![0, 1]],
            vec![],
            vec![],
            vec![],
        ];
        let f = make_fbas(4, &raw).unwrap();
        assert_eq!(f.to_raw()[0], vec![vec![0, 1], vec![0, 2]]);
        let raw = vec![
            vec![vec![0, 3], vec![0, 1, 3], vec![0, 2]],
            vec![],
            vec![],
            vec![],
        ];
        let f = make_fbas(4, &raw).unwrap();
        assert_eq!(f.to_raw()[0], vec![vec![0, 2], vec![0, 3]]);
        let raw = vec![vec![vec![0, 2], vec![0, 1, 3]], vec![], vec![], vec![]];
        let f = make_fbas(4, &raw).unwrap();
        assert_eq!(f.to_raw()[0], vec![vec![0, 1, 3], vec![0, 2]]);
    }

    #[test]
    fn lex_order_matches_vec_order() {
        let masks = [
            0b1u64,
            0b11,
            0b101,
            0b110,
            0b1001,
            0b111,
            u64::MAX,
            1 << 63,
            0b10,
        ];
        for &a in &masks {
            for &b in &masks {
                let va = NodeSet::from_bits_unchecked(64, a).to_vec();
                let vb = NodeSet::from_bits_unchecked(64, b).to_vec();
                assert_eq!(lex_cmp(a, b), va.cmp(&vb), "{va:?} vs {vb:?}");
            }
        }
    }

    #[test]
    fn owner_missing() {
        let raw = vec![vec![vec![1]], vec![vec![1]]];
        assert!(matches!(
            make_fbas(2, &raw),
            Err(Error::OwnerMissing { node: 0, .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(make_fbas(0, &[]), Err(Error::EmptyUniverse));
        let raw = vec![vec![vec![0, 5]], vec![]];
        assert!(matches!(
            make_fbas(2, &raw),
            Err(Error::IndexOutOfRange {
                node: Some(0),
                index: 5,
                n: 2
            })
        ));
        assert!(matches!(
            make_fbas(2, &[vec![]]),
            Err(Error::SliceCountMismatch { .. })
        ));
    }

    #[test]
    fn nodes_without_slices_are_allowed() {
        let f = make_fbas(2, &[vec![], vec![vec![1]]]).unwrap();
        assert_eq!(f.slice_count(0), 0);
        assert!(!f.is_quorum(&set(2, &[0, 1])).unwrap());
        assert!(f.is_quorum(&set(2, &[1])).unwrap());
    }

    #[test]
    fn self_slices_make_singletons_quorums() {
        let raw: Vec<_> = (0..3).map(|v| vec![vec![v]]).collect();
        let f = make_fbas(3, &raw).unwrap();
        assert!(f.is_quorum(&set(3, &[0])).unwrap());
        assert!(!f.is_quorum(&NodeSet::empty(3).unwrap()).unwrap());
    }

    #[test]
    fn traditional_bft_four_nodes() {
        let f = traditional_bft(4);
        // every node needs itself plus 3 others, or itself among 3 with 2 others...
        // threshold ceil(8/3) = 3, so slices are all 3-sets and 4-sets containing v
        // reduced to the 3-sets containing v.
        assert!(f.slices(0).all(|s| s.len() == 3 && s.contains(0)));
        assert_eq!(f.slice_count(0), 3);
        assert!(f.is_quorum(&set(4, &[0, 1, 2])).unwrap());
        assert!(f.is_quorum(&set(4, &[0, 1, 2, 3])).unwrap());
        assert!(!f.is_quorum(&set(4, &[0, 1])).unwrap());
    }

    #[test]
    fn universe_mismatch() {
        let f = ring(3);
        assert!(matches!(
            f.is_quorum(&set(4, &[0])),
            Err(Error::UniverseMismatch {
                expected: 3,
                found: 4
            })
        ));
        assert!(f.greatest_quorum_within(&set(2, &[0])).is_err());
        assert!(f.delete_nodes(&set(5, &[0])).is_err());
    }

    #[test]
    fn closure_cascades_to_empty() {
        let f = ring(3);
        assert!(f
            .greatest_quorum_within(&set(3, &[0, 1]))
            .unwrap()
            .is_empty());
        assert_eq!(
            f.greatest_quorum_within(&f.all_nodes()).unwrap(),
            f.all_nodes()
        );
    }

    #[test]
    fn deletion_shrinks_slices() {
        let raw = vec![vec![vec![0, 1, 2]], vec![vec![1]], vec![vec![2]]];
        let f = make_fbas(3, &raw).unwrap();
        let (g, map) = f.delete_nodes(&set(3, &[2])).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.to_raw()[0], vec![vec![0, 1]]);
        assert_eq!(map.survivors(), &[0, 1]);

        let (same, map) = f.delete_nodes(&NodeSet::empty(3).unwrap()).unwrap();
        assert_eq!(same, f);
        assert_eq!(map.survivors(), &[0, 1, 2]);

        assert_eq!(
            f.delete_nodes(&f.all_nodes()),
            Err(Error::DeletedEverything)
        );
    }

    #[test]
    fn deletion_remaps_and_recanonicalizes() {
        // Node 3's slices {1,3} and {1,2,3} collapse to {1,3} then to new {0,1}... after deleting 0 and 2.
        let raw = vec![
            vec![vec![0]],
            vec![vec![1, 3]],
            vec![vec![2]],
            vec![vec![1, 2, 3], vec![0, 1, 3]],
        ];
        let f = make_fbas(4, &raw).unwrap();
        let (g, map) = f.delete_nodes(&set(4, &[0, 2])).unwrap();
        assert_eq!(map.survivors(), &[1, 3]);
        assert_eq!(map.to_new(3), Some(1));
        assert_eq!(map.to_new(2), None);
        assert_eq!(g.to_raw(), vec![vec![vec![0, 1]], vec![vec![0, 1]]]);
        assert_eq!(map.lift(&set(2, &[1])).unwrap(), set(4, &[3]));
        assert_eq!(map.lower(&set(4, &[0, 3])).unwrap(), set(2, &[1]));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let f = ring(4);
        let text = f.to_json();
        assert_eq!(
            text,
            r#"{"version":1,"n":4,"slices":[[[0,1]],[[1,2]],[[2,3]],[[0,3]]]}"#
        );
        assert_eq!(Fbas::from_json(&text).unwrap(), f);
        assert_eq!(
            Fbas::from_json(r#"{"version":2,"n":1,"slices":[[]]}"#),
            Err(Error::UnsupportedVersion(2))
        );
        assert!(matches!(
            Fbas::from_json(r#"{"n":1,"slices":[[]]}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            Fbas::from_json(r#"{"version":1,"n":2,"slices":[[[1]],[[1]]]}"#),
            Err(Error::OwnerMissing { .. })
        ));
    }

    #[test]
    fn extra_slice_is_canonicalized() {
        let f = ring(3);
        let g = f.with_extra_slice(0, set(3, &[0])).unwrap();
        assert_eq!(g.to_raw()[0], vec![vec![0]]);
        assert!(f.with_extra_slice(0, set(3, &[1])).is_err());
    }

    fn arb_raw(n: usize) -> impl Strategy<Value = Vec<Vec<u64>>> {
        let full = full_mask(n);
        proptest::collection::vec(proptest::collection::vec(any::<u64>(), 0..5), n).prop_map(
            move |lists| {
                lists
                    .into_iter()
                    .enumerate()
                    .map(|(v, l)| l.into_iter().map(|m| (m & full) | 1 << v).collect())
                    .collect()
            },
        )
    }

    // Quorum semantics evaluated straight from the raw slice lists.
    fn raw_is_quorum(raw: &[Vec<u64>], u: u64) -> bool {
        u != 0
            && NodeSet::from_bits_unchecked(raw.len(), u)
                .iter()
                .all(|v| raw[v].iter().any(|&s| s & !u == 0))
    }

    fn to_fbas(n: usize, raw: &[Vec<u64>]) -> Fbas {
        let lists: Vec<Vec<Vec<usize>>> = raw
            .iter()
            .map(|l| {
                l.iter()
                    .map(|&m| NodeSet::from_bits_unchecked(n, m).to_vec())
                    .collect()
            })
            .collect();
        make_fbas(n, &lists).unwrap()
    }

    proptest! {
        #[test]
        fn canonicalization_preserves_quorums(raw in arb_raw(6)) {
            let f = to_fbas(6, &raw);
            for u in 0u64..64 {
                let s = NodeSet::from_bits_unchecked(6, u);
                prop_assert_eq!(f.is_quorum(&s).unwrap(), raw_is_quorum(&raw, u));
            }
            for v in 0..6 {
                let sl: Vec<u64> = f.slices(v).map(|s| s.bits()).collect();
                for (i, a) in sl.iter().enumerate() {
                    prop_assert!(a & (1 << v) != 0);
                    for (j, b) in sl.iter().enumerate() {
                        if i != j { prop_assert!(a & !b != 0, "{a:b} within {b:b}"); }
                    }
                }
            }
        }

        #[test]
        fn closure_properties(raw in arb_raw(7), s in 0u64..128, t in 0u64..128) {
            let f = to_fbas(7, &raw);
            let sset = NodeSet::from_bits_unchecked(7, s);
            let g = f.greatest_quorum_within(&sset).unwrap();
            prop_assert!(g.is_subset(&sset));
            prop_assert_eq!(f.greatest_quorum_within(&g).unwrap(), g);
            prop_assert!(g.is_empty() || f.is_quorum(&g).unwrap());
            if !sset.is_empty() {
                prop_assert_eq!(f.is_quorum(&sset).unwrap(), g == sset);
            }
            // g is the largest quorum inside s
            for u in 1u64..128 {
                if u & !s == 0 && raw_is_quorum(&raw, u) {
                    prop_assert!(u & !g.bits() == 0);
                }
            }
            let tset = NodeSet::from_bits_unchecked(7, t);
            if f.is_quorum(&sset).unwrap() && f.is_quorum(&tset).unwrap() {
                prop_assert!(f.is_quorum(&sset.union(&tset)).unwrap());
            }
        }

        #[test]
        fn deletion_composes(raw in arb_raw(7), a in 0u64..128, b in 0u64..128) {
            let f = to_fbas(7, &raw);
            let a_set = NodeSet::from_bits_unchecked(7, a);
            let b_set = NodeSet::from_bits_unchecked(7, b & !a);
            let ab = a_set.union(&b_set);
            prop_assume!(ab.len() < 7);
            let (fa, ma) = f.delete_nodes(&a_set).unwrap();
            let (fab, mb) = fa.delete_nodes(&ma.lower(&b_set).unwrap()).unwrap();
            let (direct, md) = f.delete_nodes(&ab).unwrap();
            prop_assert_eq!(&fab, &direct);
            prop_assert_eq!(ma.then(&mb), md);
        }
    }
}

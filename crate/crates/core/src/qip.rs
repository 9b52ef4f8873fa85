//! Exact quorum-intersection checking.
//!
//! A system has the quorum intersection property when no two of its quorums
//! are disjoint. Deciding it is NP-complete, so both checkers here are
//! exponential in the worst case:
//!
//! * [`find_disjoint_quorums`] is a branch-and-bound over candidate quorums
//!   that prunes with quorum closures and stays fast at the sizes used for
//!   sweeps (n = 16).
//! * [`brute_force_disjoint_quorums`] walks every disjoint pair of subsets
//!   and tests each side against the quorum definition directly. It exists to
//!   cross-check the engine and refuses universes above a configurable cap.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbas::Fbas;
use crate::nodeset::{NodeSet, MAX_NODES};

/// Default largest universe the brute-force oracle accepts.
pub const DEFAULT_ORACLE_CAP: usize = 12;

/// Outcome of a quorum-intersection check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QipVerdict {
    /// Every pair of quorums intersects.
    Satisfied,
    /// The two sets are disjoint quorums.
    Violated(NodeSet, NodeSet),
}

impl QipVerdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, QipVerdict::Satisfied)
    }

    pub fn witness(&self) -> Option<(NodeSet, NodeSet)> {
        match *self {
            QipVerdict::Satisfied => None,
            QipVerdict::Violated(a, b) => Some((a, b)),
        }
    }

    /// `{"status":"satisfied"}` or `{"status":"violated","witness":[[..],[..]]}`.
    pub fn to_json(&self) -> String {
        let doc = match self {
            QipVerdict::Satisfied => VerdictDocument::Satisfied,
            QipVerdict::Violated(a, b) => VerdictDocument::Violated {
                witness: [a.to_vec(), b.to_vec()],
            },
        };
        serde_json::to_string(&doc).expect("plain data serializes")
    }

    /// Parses a verdict document whose witness lives in a universe of `n` nodes.
    pub fn from_json(text: &str, n: usize) -> Result<QipVerdict> {
        let doc: VerdictDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(match doc {
            VerdictDocument::Satisfied => QipVerdict::Satisfied,
            VerdictDocument::Violated { witness: [a, b] } => {
                QipVerdict::Violated(NodeSet::from_indices(n, a)?, NodeSet::from_indices(n, b)?)
            }
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum VerdictDocument {
    Satisfied,
    Violated { witness: [Vec<usize>; 2] },
}

/// Decides quorum intersection exactly with closure-pruned branch and bound.
pub fn find_disjoint_quorums(fbas: &Fbas) -> Result<QipVerdict> {
    find_disjoint_quorums_until(fbas, None)
}

/// Like [`find_disjoint_quorums`], giving up with [`Error::Timeout`] once
/// `deadline` passes.
pub fn find_disjoint_quorums_until(fbas: &Fbas, deadline: Option<Instant>) -> Result<QipVerdict> {
    let n = fbas.n();
    if n > MAX_NODES {
        return Err(Error::UniverseTooLarge { n, max: MAX_NODES });
    }
    let all = fbas.closure_mask(fbas.all_nodes().bits());
    if all == 0 {
        return Ok(QipVerdict::Satisfied);
    }
    let mut search = Search {
        fbas,
        deadline,
        visited: 0,
    };
    Ok(match search.run(0, all, all)? {
        None => QipVerdict::Satisfied,
        Some((a, b)) => QipVerdict::Violated(
            NodeSet::from_bits_unchecked(n, a),
            NodeSet::from_bits_unchecked(n, b),
        ),
    })
}

struct Search<'a> {
    fbas: &'a Fbas,
    deadline: Option<Instant>,
    visited: u64,
}

impl Search<'_> {
    /// Looks for a quorum `U` with `include ⊆ U ⊆ top` whose complement holds
    /// another quorum.
    ///
    /// `top` is the greatest quorum avoiding every excluded node and `rest` is
    /// the greatest quorum avoiding `include`; any partner quorum lives in
    /// `rest`.
    fn run(&mut self, include: u64, top: u64, rest: u64) -> Result<Option<(u64, u64)>> {
        self.visited += 1;
        if self.visited.is_multiple_of(1024) {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    return Err(Error::Timeout);
                }
            }
        }
        if top == 0 || rest == 0 || include & !top != 0 {
            return Ok(None);
        }
        // The smaller quorum of a disjoint pair has at most n/2 members.
        if 2 * include.count_ones() as usize > self.fbas.n() {
            return Ok(None);
        }
        let partner = self.fbas.closure_mask(rest & !top);
        if partner != 0 {
            return Ok(Some((top, partner)));
        }
        let free = top & !include;
        if free == 0 {
            return Ok(None);
        }
        let v = 1u64 << free.trailing_zeros();
        if let Some(found) = self.run(include | v, top, self.fbas.closure_mask(rest & !v))? {
            return Ok(Some(found));
        }
        self.run(include, self.fbas.closure_mask(top & !v), rest)
    }
}

/// Exhaustive oracle over all disjoint pairs of subsets, capped at
/// [`DEFAULT_ORACLE_CAP`] nodes.
pub fn brute_force_disjoint_quorums(fbas: &Fbas) -> Result<QipVerdict> {
    brute_force_disjoint_quorums_with_cap(fbas, DEFAULT_ORACLE_CAP, None)
}

/// Exhaustive oracle with an explicit universe cap and optional deadline.
///
/// Each subset `U` is tested against the quorum definition; for every
/// quorum, every nonempty subset of its complement is tested the same way.
/// The first pair found in ascending mask order is returned.
pub fn brute_force_disjoint_quorums_with_cap(
    fbas: &Fbas,
    cap: usize,
    deadline: Option<Instant>,
) -> Result<QipVerdict> {
    let n = fbas.n();
    let cap = cap.min(MAX_NODES - 1);
    if n > cap {
        return Err(Error::UniverseTooLarge { n, max: cap });
    }
    let full = (1u64 << n) - 1;
    let is_quorum = |u: u64| {
        NodeSet::from_bits_unchecked(n, u)
            .iter()
            .all(|v| fbas.raw_masks(v).iter().any(|&s| s & !u == 0))
    };
    let mut steps = 0u64;
    let expired =
        |steps: u64| steps.is_multiple_of(4096) && deadline.is_some_and(|d| Instant::now() >= d);
    for u in 1..=full {
        steps += 1;
        if expired(steps) {
            return Err(Error::Timeout);
        }
        if !is_quorum(u) {
            continue;
        }
        let comp = full & !u;
        let mut w = comp;
        while w != 0 {
            steps += 1;
            if expired(steps) {
                return Err(Error::Timeout);
            }
            if is_quorum(w) {
                return Ok(QipVerdict::Violated(
                    NodeSet::from_bits_unchecked(n, u),
                    NodeSet::from_bits_unchecked(n, w),
                ));
            }
            w = (w - 1) & comp;
        }
    }
    Ok(QipVerdict::Satisfied)
}

/// True iff both sets are quorums of `fbas` and they share no node.
pub fn verify_witness(fbas: &Fbas, u1: &NodeSet, u2: &NodeSet) -> Result<bool> {
    Ok(fbas.is_quorum(u1)? && fbas.is_quorum(u2)? && u1.is_disjoint(u2))
}

/// Checks quorum intersection of the system left after removing `byzantine`.
///
/// A witness, if any, is a pair of disjoint quorums of the reduced system,
/// reported in the original node numbering.
pub fn check_safety_after_deletion(fbas: &Fbas, byzantine: &NodeSet) -> Result<QipVerdict> {
    check_safety_after_deletion_until(fbas, byzantine, None)
}

pub fn check_safety_after_deletion_until(
    fbas: &Fbas,
    byzantine: &NodeSet,
    deadline: Option<Instant>,
) -> Result<QipVerdict> {
    let (reduced, map) = fbas.delete_nodes(byzantine)?;
    Ok(match find_disjoint_quorums_until(&reduced, deadline)? {
        QipVerdict::Satisfied => QipVerdict::Satisfied,
        QipVerdict::Violated(a, b) => QipVerdict::Violated(map.lift(&a)?, map.lift(&b)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbas::make_fbas;
    use crate::genmodel::{sample_fbas, GenerativeParams};
    use proptest::prelude::*;

    fn set(n: usize, idx: &[usize]) -> NodeSet {
        NodeSet::from_indices(n, idx.iter().copied()).unwrap()
    }

    fn self_sufficient(n: usize) -> Fbas {
        let raw: Vec<_> = (0..n).map(|v| vec![vec![v]]).collect();
        make_fbas(n, &raw).unwrap()
    }

    fn everyone_needs_all(n: usize) -> Fbas {
        let raw: Vec<_> = (0..n).map(|_| vec![(0..n).collect()]).collect();
        make_fbas(n, &raw).unwrap()
    }

    #[test]
    fn two_self_sufficient_nodes() {
        let f = self_sufficient(2);
        let expected = QipVerdict::Violated(set(2, &[0]), set(2, &[1]));
        assert_eq!(find_disjoint_quorums(&f).unwrap(), expected);
        assert_eq!(brute_force_disjoint_quorums(&f).unwrap(), expected);
    }

    #[test]
    fn single_quorum_is_satisfied() {
        for n in 1..6 {
            let f = everyone_needs_all(n);
            assert_eq!(find_disjoint_quorums(&f).unwrap(), QipVerdict::Satisfied);
            assert_eq!(
                brute_force_disjoint_quorums(&f).unwrap(),
                QipVerdict::Satisfied
            );
        }
    }

    #[test]
    fn no_slices_means_no_quorums() {
        let f = make_fbas(3, &[vec![], vec![], vec![]]).unwrap();
        assert!(find_disjoint_quorums(&f).unwrap().is_satisfied());
        assert!(brute_force_disjoint_quorums(&f).unwrap().is_satisfied());
    }

    #[test]
    fn oracle_cap() {
        let f = self_sufficient(13);
        assert!(matches!(
            brute_force_disjoint_quorums(&f),
            Err(Error::UniverseTooLarge { n: 13, max: 12 })
        ));
        assert!(!brute_force_disjoint_quorums_with_cap(&f, 13, None)
            .unwrap()
            .is_satisfied());
    }

    #[test]
    fn dense_small_k_floods_with_quorums() {
        let f = sample_fbas(&GenerativeParams::new(8, 2, 100.0, 7).unwrap()).unwrap();
        let verdict = brute_force_disjoint_quorums(&f).unwrap();
        let (a, b) = verdict.witness().expect("violated");
        assert!(verify_witness(&f, &a, &b).unwrap());
        assert!(!find_disjoint_quorums(&f).unwrap().is_satisfied());
    }

    #[test]
    fn witness_checks() {
        let f = self_sufficient(3);
        let q = set(3, &[0]);
        assert!(!verify_witness(&f, &q, &q).unwrap());
        assert!(verify_witness(&f, &q, &set(3, &[1, 2])).unwrap());

        // node 2 has no slice, so {2} is not a quorum
        let g = make_fbas(3, &[vec![vec![0]], vec![vec![1]], vec![]]).unwrap();
        assert!(!verify_witness(&g, &set(3, &[0]), &set(3, &[2])).unwrap());
        assert!(verify_witness(&g, &set(3, &[0]), &set(4, &[1])).is_err());
    }

    #[test]
    fn deletion_check() {
        let f = everyone_needs_all(3);
        let v = check_safety_after_deletion(&f, &set(3, &[2])).unwrap();
        assert_eq!(v, QipVerdict::Satisfied);
        assert_eq!(
            check_safety_after_deletion(&f, &f.all_nodes()),
            Err(Error::DeletedEverything)
        );

        let empty = NodeSet::empty(3).unwrap();
        let s = self_sufficient(3);
        assert_eq!(
            check_safety_after_deletion(&s, &empty).unwrap(),
            find_disjoint_quorums(&s).unwrap()
        );
    }

    #[test]
    fn deletion_check_on_a_ring() {
        // Q(v) = {{v, v+1 mod 4}}: the only quorum is V. Removing node 3
        // turns node 2's slice into {2}, so {2} becomes a quorum, and the
        // chain 1 -> 2, 0 -> 1 makes every suffix {i..=2} a quorum. All of
        // them contain 2, so intersection still holds.
        let raw: Vec<_> = (0..4).map(|v| vec![vec![v, (v + 1) % 4]]).collect();
        let f = make_fbas(4, &raw).unwrap();
        let b = set(4, &[3]);
        let (reduced, _) = f.delete_nodes(&b).unwrap();
        let oracle = brute_force_disjoint_quorums(&reduced).unwrap();
        assert_eq!(oracle, QipVerdict::Satisfied);
        assert_eq!(check_safety_after_deletion(&f, &b).unwrap(), oracle);
    }

    #[test]
    fn witness_is_lifted_to_original_indices() {
        let f = self_sufficient(4);
        let b = set(4, &[0, 2]);
        let v = check_safety_after_deletion(&f, &b).unwrap();
        assert_eq!(v, QipVerdict::Violated(set(4, &[1]), set(4, &[3])));
    }

    #[test]
    fn verdict_json() {
        assert_eq!(QipVerdict::Satisfied.to_json(), r#"{"status":"satisfied"}"#);
        let v = QipVerdict::Violated(set(5, &[0, 3]), set(5, &[1]));
        let text = v.to_json();
        assert_eq!(text, r#"{"status":"violated","witness":[[0,3],[1]]}"#);
        assert_eq!(QipVerdict::from_json(&text, 5).unwrap(), v);
    }

    #[test]
    fn timeout_is_reported() {
        // n = 48 with 200 twelve-node slices per node takes far longer than
        // the first deadline check.
        let f = sample_fbas(&GenerativeParams::new(48, 12, 200.0, 3).unwrap()).unwrap();
        let now = Some(Instant::now());
        assert_eq!(find_disjoint_quorums_until(&f, now), Err(Error::Timeout));
        let b = NodeSet::from_indices(48, [0]).unwrap();
        assert_eq!(
            check_safety_after_deletion_until(&f, &b, now),
            Err(Error::Timeout)
        );
        let g = make_fbas(13, &vec![vec![]; 13]).unwrap();
        assert_eq!(
            brute_force_disjoint_quorums_with_cap(&g, 13, now),
            Err(Error::Timeout)
        );
    }

    fn majority_system(n: usize, size: usize) -> Fbas {
        // every node holds the same list: all `size`-sets (those containing v).
        let sets: Vec<u64> = (0u64..1 << n)
            .filter(|m| m.count_ones() as usize == size)
            .collect();
        let raw: Vec<_> = (0..n)
            .map(|v| {
                sets.iter()
                    .filter(|&&m| m & 1 << v != 0)
                    .map(|&m| NodeSet::from_bits_unchecked(n, m).to_vec())
                    .collect()
            })
            .collect();
        make_fbas(n, &raw).unwrap()
    }

    #[test]
    fn majority_slices_intersect() {
        for n in 3..=9 {
            let f = majority_system(n, n / 2 + 1);
            assert!(find_disjoint_quorums(&f).unwrap().is_satisfied(), "n={n}");
            let g = majority_system(n, n / 2);
            assert!(!find_disjoint_quorums(&g).unwrap().is_satisfied(), "n={n}");
        }
    }

    fn arb_fbas(n: usize) -> impl Strategy<Value = Fbas> {
        proptest::collection::vec(proptest::collection::vec(any::<u64>(), 0..4), n).prop_map(
            move |lists| {
                let raw: Vec<Vec<Vec<usize>>> = lists
                    .into_iter()
                    .enumerate()
                    .map(|(v, l)| {
                        l.into_iter()
                            .map(|m| {
                                // sparse slices so that both verdicts occur
                                let m = (m & (m >> 7) & (m >> 13)) & ((1 << n) - 1);
                                NodeSet::from_bits_unchecked(n, m | 1 << v).to_vec()
                            })
                            .collect()
                    })
                    .collect();
                make_fbas(n, &raw).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn engine_matches_oracle(f in (2usize..=9).prop_flat_map(arb_fbas)) {
            let fast = find_disjoint_quorums(&f).unwrap();
            let slow = brute_force_disjoint_quorums(&f).unwrap();
            prop_assert_eq!(fast.is_satisfied(), slow.is_satisfied());
            if let Some((a, b)) = fast.witness() {
                prop_assert!(verify_witness(&f, &a, &b).unwrap());
            }
        }

        #[test]
        fn adding_slices_never_restores_intersection(
            f in arb_fbas(8), v in 0usize..8, extra in any::<u64>()
        ) {
            let before = find_disjoint_quorums(&f).unwrap();
            let slice = NodeSet::from_bits_unchecked(8, (extra & 0xff) | 1 << v);
            let after = find_disjoint_quorums(&f.with_extra_slice(v, slice).unwrap()).unwrap();
            if !before.is_satisfied() {
                prop_assert!(!after.is_satisfied());
            }
        }

        #[test]
        fn engine_is_deterministic(f in arb_fbas(8)) {
            prop_assert_eq!(find_disjoint_quorums(&f).unwrap(), find_disjoint_quorums(&f).unwrap());
        }
    }
}

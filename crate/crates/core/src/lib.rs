//! Federated Byzantine agreement systems (FBAS) and quorum intersection.
//!
//! The crate covers four things:
//!
//! * [`fbas`]: the quorum-slice data model, quorums, quorum closure and
//!   node deletion, over universes of up to 64 nodes ([`NodeSet`]).
//! * [`qip`]: exact checks for disjoint quorums, a brute-force oracle and
//!   the check of a system after removing a set of Byzantine nodes.
//! * [`genmodel`], [`analytics`], [`sweep`]: the Avalanche-style random
//!   slice model, its closed-form quorum probabilities and bound curves, and
//!   reproducible parameter sweeps.
//! * [`slush`]: the repeated-sampling majority detector.
//!
//! ```
//! use fbas_core::{make_fbas, find_disjoint_quorums, QipVerdict};
//!
//! // Two nodes that trust only themselves form two disjoint quorums.
//! let fbas = make_fbas(2, &[vec![vec![0]], vec![vec![1]]])?;
//! assert!(matches!(find_disjoint_quorums(&fbas)?, QipVerdict::Violated(..)));
//! # Ok::<(), fbas_core::Error>(())
//! ```

pub mod analytics;
pub mod error;
pub mod fbas;
pub mod genmodel;
pub mod nodeset;
pub mod qip;
pub mod slush;
pub mod sweep;

pub use analytics::{
    classify_regime, expected_quorum_count, falling_factorial, quorum_probability,
    upper_bound_lambda, Regime,
};
pub use error::{Error, Result};
pub use fbas::{make_fbas, Fbas, IndexMap};
pub use genmodel::{sample_fbas, sample_poisson, sample_subset, GenerativeParams};
pub use nodeset::{NodeSet, MAX_NODES};
pub use qip::{
    brute_force_disjoint_quorums, check_safety_after_deletion, find_disjoint_quorums,
    verify_witness, QipVerdict,
};
pub use slush::{run_slush, slush_round, SlushConfig, SlushOutcome};
pub use sweep::{run_sweep, summarize_sweep, SweepConfig, SweepRecord};

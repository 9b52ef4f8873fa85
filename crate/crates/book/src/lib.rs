//! The guide under `book/`, compiled so its samples run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/quorums.md")]
pub mod quorums {}

#[doc = include_str!("../../../book/src/intersection.md")]
pub mod intersection {}

#[doc = include_str!("../../../book/src/deletion.md")]
pub mod deletion {}

#[doc = include_str!("../../../book/src/genmodel.md")]
pub mod genmodel {}

#[doc = include_str!("../../../book/src/analytics.md")]
pub mod analytics {}

#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}

#[doc = include_str!("../../../book/src/slush.md")]
pub mod slush {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

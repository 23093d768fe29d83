//! Exact computation in finitely generated nilpotent groups of class at most 2:
//! Malcev-coordinate arithmetic, gap-bounded sum concentration, bounded
//! generation of finitely generated submonoids, and knapsack / submonoid
//! membership solving when the commutator subgroup has Hirsch length 1.

pub mod bounded_gen;
pub mod cli;
pub mod diophantine;
pub mod error;
pub mod gap_rewrite;
pub mod group_core;
pub mod intser;
pub mod oracle;
pub mod subgroup_tools;

pub use error::{Error, Result};
pub use group_core::{GroupElement, GroupPresentation, Order};

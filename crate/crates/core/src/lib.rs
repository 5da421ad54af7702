//! Sparse inference laboratory.
//!
//! Synthetic superposition data with compositional in-distribution /
//! out-of-distribution splits, per-sample Lasso solvers (ISTA/FISTA),
//! matching pursuit, classical dictionary learning, shallow sparse
//! autoencoders, identifiability metrics, supervised probes and the
//! closed-form accuracy model of a linear classifier in a 2-D toy system.

pub mod dictlearn;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod probes;
pub mod rng;
pub mod sae;
pub mod solvers;
pub mod synthgen;
pub mod theory;

pub use error::{LabError, Result};

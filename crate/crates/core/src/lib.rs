//! Iterative hard thresholding and its structured variant for sparse
//! recovery, with coherence-based error bounds and an inverse-source model
//! for far-field plane-wave data.

pub mod coherence;
pub mod error;
pub mod isp;
pub mod numerics;
pub mod offgrid;
pub mod preprocessing;
pub mod rng;
pub mod solvers;
pub mod thresholding;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numerics::{ComplexMatrix, ComplexVector};
pub use solvers::{iht_solve, structured_iht_solve, SolveConfig, SolveTrace, StopReason};
pub use thresholding::{hard_threshold, local_threshold, structured_threshold, SparsityStructure};

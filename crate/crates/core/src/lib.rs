//! Smallest eigenvalue of random Toeplitz and rectangular circulant Gram
//! matrices: structured operators, eigensolvers, the periodogram upper bound,
//! lemma-level checks and the Monte Carlo harness.

pub mod eigensolver;
pub mod error;
pub mod fourier_bound;
pub mod mc_harness;
pub mod rng;
pub mod structured_matrix;
pub mod theory_checks;

pub use error::{Error, Result};

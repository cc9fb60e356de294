//! Dense linear algebra and sampling kernels.
//!
//! Everything in here is self-contained: symmetric positive definite
//! matrices factored by Cholesky, ridge regression on dense designs, and
//! seeded multivariate normal / inverse-gamma sampling. All system matrices
//! produced elsewhere in the crate are positive definite by construction
//! (a ridge or prior precision term is always added), so Cholesky is the
//! only factorization we need.

mod linalg;
mod rng;
mod sampling;
mod special;

pub use linalg::{ridge_fit, solve_spd, Cholesky, SpdMatrix};
pub use rng::{stream_id_for, RngStream};
pub use sampling::{sample_inverse_gamma, sample_mvn, sample_mvn_from_precision};
pub use special::{erf, erfc, normal_cdf, normal_pdf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {delta:e} exceeds 1e-10")]
    NotSymmetric { i: usize, j: usize, delta: f64 },

    #[error("Cholesky factorization failed: non-positive pivot {pivot:e} at index {index}{advice}")]
    NotPositiveDefinite {
        index: usize,
        pivot: f64,
        advice: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

//! Covariance recovery from discretely observed functional fragments.
//!
//! Curves observed only on short subintervals carry covariance information
//! inside a band around the diagonal. This crate builds the banded
//! pairwise-complete ("patched") covariance, completes it to a full
//! positive semi-definite matrix by masked low-rank least squares in a
//! factorised parameterisation, and ships the simulation harness used to
//! benchmark the estimator.
//!
//! Dense linear algebra is generic over [`Real`] (`f32` or `f64`). The
//! determinant-propagation completion in [`complete::exact_band_completion`]
//! additionally runs over exact rationals. Concrete `f64` aliases are
//! exported at the crate root.

pub mod complete;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod mask;
pub mod matrix;
pub mod patch;
pub mod rng;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use grid::Grid;
pub use mask::{band_mask, band_width, BandMask};
pub use matrix::{masked_frobenius_sq, relative_error, LowRankFactor, SymMatrix};
pub use scalar::Real;

/// `f64` symmetric matrix.
pub type SymMatrix64 = SymMatrix<f64>;
/// `f32` symmetric matrix.
pub type SymMatrix32 = SymMatrix<f32>;
/// `f64` low-rank factor.
pub type LowRankFactor64 = LowRankFactor<f64>;
/// `f64` patched covariance.
pub type PatchedCovariance64 = patch::PatchedCovariance<f64>;

/// Exact rational scalar accepted by the completion oracle.
pub type Rational = num_rational::Ratio<i128>;

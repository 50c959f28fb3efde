//! Optimal and minimax-robust linear filtering for periodically correlated
//! (cyclostationary) processes.
//!
//! A periodically correlated process observed in additive uncorrelated noise
//! is reduced, by blocking over its period, to a pair of vector stationary
//! sequences with matrix spectral densities `f` (signal) and `g` (noise).
//! This crate computes the mean-square optimal linear estimate of a linear
//! functional of the unobserved signal from past observations, by way of
//! canonical matrix spectral factorization, and solves the robust version of
//! the problem over moment-constrained density classes.
//!
//! The main pieces:
//!
//! - [`blocking`] — period-blocking of sampled paths and weight functions
//!   into the truncated vector stationary representation, and back.
//! - [`spectral`] — matrix spectral densities on a frequency grid, canonical
//!   factorization (Wilson iteration), factor inversion, covariances.
//! - [`filter`] — spectral characteristic and mean-square error of the
//!   optimal estimate by both dual routes, white-noise closed forms, and
//!   time-domain evaluation of the estimate.
//! - [`minimax`] — least favorable spectral densities under per-harmonic
//!   second-moment constraints, Lagrange stationarity residuals, and
//!   saddle-point probing.
//! - [`oracle`] — independent ground truth: moving-average simulation and
//!   finite-horizon MMSE via block-Toeplitz normal equations.
//! - [`textio`] — the structured text formats shared with the CLI.

pub mod blocking;
pub mod error;
pub mod filter;
pub mod grid;
pub mod minimax;
pub mod oracle;
pub mod spectral;
pub mod synth;
pub mod textio;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;

/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;

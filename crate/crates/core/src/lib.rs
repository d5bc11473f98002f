//! Sparsity-constrained independent component analysis from second-order
//! statistics.
//!
//! Gaussian sources make the mixing matrix unidentifiable from the
//! covariance alone: `Σ = A Aᵀ` is unchanged by any right rotation of `A`.
//! This crate recovers `A` up to signed column permutation by searching for
//! the sparsest factor of `Σ` whose support can be permuted to lower
//! triangular form. It provides
//!
//! - [`model`]: mixing matrices, support patterns, signed permutations;
//! - [`structure`]: checkers for the structural assumptions on the support
//!   (structural variability, lower-triangularizability, column subset and
//!   the two prior sparsity assumptions), support rotations and the
//!   covariance Jacobian;
//! - [`objective`]: the acyclicity-style trace function `g(A)`, the MCP
//!   penalty, the Gaussian negative log-likelihood and the decomposition
//!   residual, each with analytic gradients;
//! - [`solver`]: the two quadratic-penalty estimators on top of an L-BFGS
//!   inner minimizer, with random restarts and model selection;
//! - [`simulate`], [`metrics`]: ground-truth generation, MCC, Amari distance
//!   and a FastICA baseline;
//! - [`causal`]: conversion between mixing matrices and linear SEMs;
//! - [`io`], [`cli`]: file formats and the reproduction harness behind the
//!   `sparse-ica` binary.
//!
//! ```
//! use sparse_ica::model::{MixingMatrix, SupportPattern};
//! use sparse_ica::structure;
//!
//! let xi = SupportPattern::from_rows(&[&[1, 0, 0], &[1, 1, 0], &[1, 0, 1]]).unwrap();
//! assert!(structure::check_structural_variability(&xi));
//! assert!(!structure::check_column_subset(&xi));
//! let a = MixingMatrix::identity(3);
//! assert_eq!(sparse_ica::model::support_of(&a, 0.0).nnz(), 3);
//! ```

pub mod assignment;
pub mod causal;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod simulate;
pub mod solver;
pub mod structure;

pub use error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

//! Centered and scaled weighted least squares on sparse design matrices.
//!
//! Centering a sparse design makes it dense. This crate never forms the
//! centered matrix: the normal equations are expanded into a sparse weighted
//! Gram plus cheap rank-one corrections built from column sums and means, so
//! the fit costs `O(nnz · overlap + p³)` time and `O(nnz + n + p²)` memory.
//!
//! ```
//! use centered_ols::{fit, FitOptions, SparseDesign};
//!
//! let m = SparseDesign::from_rows(&[&[1.0, 1.0], &[1.0, 3.0], &[1.0, 5.0]]).unwrap();
//! let options = FitOptions { center: true, intercept_col: Some(0), ..FitOptions::default() };
//! let result = fit(&m, &[1.0, 3.0, 5.0], &[1.0; 3], &options).unwrap();
//! let beta = result.beta_original.unwrap();
//! assert!((beta[1] - 1.0).abs() < 1e-12);
//! ```

pub mod bench;
pub mod cli;
pub mod covariance;
pub mod datagen;
pub mod error;
pub mod gram;
pub mod io;
pub mod moments;
pub mod oracle;
pub mod solver;
pub mod sparse;

pub use covariance::CovarianceKind;
pub use error::{Error, FormatError, Result, Stage};
pub use gram::{build_normal_equations, NormalEquations};
pub use moments::{compute_plan, StandardizationPlan};
pub use solver::{fit, FitOptions, FitResult};
pub use sparse::{SparseDesign, SymMatrix};

//! Finite-section realization of Hankel and Toeplitz operators on the Hardy
//! space H², their finite-rank perturbations, and numerical checks of the
//! invariance structure of their kernels.

pub mod error;
pub mod cgp;
pub mod fourier;
pub mod invariance;
pub mod linalg;
pub mod operators;
pub mod runner;
pub mod scenario;
pub mod subspaces;
pub mod symbols;

pub use error::{Error, Result};
pub use fourier::{AnalyticVector, LaurentVector, TruncationBudget, C64};

//! Radially symmetric finite-volume solvers for a reduced crime model and its
//! nonlocal limit problem, with blow-up diagnostics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupled;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod imex;
pub mod initial_data;
pub mod quadrature;
pub mod scalar;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{Profile, RadialGrid};

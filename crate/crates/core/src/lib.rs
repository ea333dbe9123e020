//! Numerical laboratory for sign-changing stationary states of the Dirichlet
//! problem `-Δu = |u|^{p-1} u` and the finite-time blow-up of nearby initial
//! data under the semilinear heat flow `v_t - Δv = |v|^{p-1} v`.
//!
//! The crate is organised around a radial pipeline
//!
//! ```text
//! stationary  ->  spectrum  ->  criterion  ->  evolution
//! ```
//!
//! backed by shared grid/quadrature machinery ([`grid`]), a symmetric
//! tridiagonal eigensolver ([`tridiag`], [`operator`]) and the critical limit
//! profile on the whole space ([`limit`]). A separate Cartesian module
//! ([`cartesian`]) provides exploratory non-radial counterparts on masked
//! 3-D grids.

pub mod cartesian;
pub mod criterion;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod limit;
pub mod ode;
pub mod operator;
pub mod spectrum;
pub mod stationary;
pub mod tridiag;

pub use crate::error::CoreError;
pub use crate::grid::{RadialGrid, RadialProfile};
pub use crate::limit::{LimitBubble, LimitEigenpair};

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, CoreError>;

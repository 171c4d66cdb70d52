//! Numerical laboratory for Hill's equation with random cycle parameters.

pub mod acceptance;
pub mod cycle_solver;
pub mod delta_limit;
pub mod error;
pub mod growth;
pub mod montecarlo;
pub mod ode;
pub mod orbits;
pub mod quadrature;
pub mod sampling;
pub mod stats;
pub mod transfer;

pub use error::{Error, ErrorClass, Result};

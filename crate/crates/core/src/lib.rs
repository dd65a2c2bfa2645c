//! Numerical laboratory for one-dimensional Schrödinger equations
//! `i u_t + u_xx + N(|u|) u = 0` with combined power-series nonlinearities.

pub mod cli;
pub mod conformal;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod nonlinearity;
pub mod petviashvili;
pub mod presets;
pub mod profiles;
pub mod quadrature;
pub mod runner;

pub use num_complex;
pub use error::{Error, Result};
pub use grid::{Backend, ComplexField, Grid};
pub use nonlinearity::{Condition, SeriesNonlinearity, Term};

//! Discrete Laguerre-Sobolev orthonormal polynomials.
//!
//! The crate constructs the orthonormal polynomials `q_n` for inner products
//! of the form
//!
//! ```text
//! <p, q> = 1/Gamma(alpha+1) * integral p q x^alpha e^{-x} dx
//!        + sum_j M_j p^(j)(0) q^(j)(0)
//! ```
//!
//! with an arbitrary finite number of point masses on derivatives at the
//! origin, and provides the desk-scale experiments built on top of them:
//! derivative-ratio limits, connection-coefficient limits, Bessel-type
//! small-argument profiles, weighted L_p norm growth, and lower bounds for
//! coefficient-multiplier partial-sum operators.
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `laguerre-sobolev` binary for the report-generating CLI.

pub mod asymptotics;
pub mod checks;
pub mod cohen;
pub mod commands;
pub mod config;
pub mod error;
pub mod gamma;
pub mod laguerre;
pub mod norms;
pub mod quadrature;
pub mod report;
pub mod sobolev;
pub mod util;

pub use error::{Error, Result};
pub use laguerre::{LaguerreExpansion, LaguerreParam};

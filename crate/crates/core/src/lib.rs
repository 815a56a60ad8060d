//! Time-splitting Fourier spectral solvers for the one-dimensional nonlinear
//! Schrödinger equation
//!
//! ```text
//! i psi_t = -psi_xx + V(x) psi + beta |psi|^{2 sigma} psi,   x in (a, b) periodic
//! ```
//!
//! with low-regularity potentials and power nonlinearities, together with the
//! tooling to measure temporal convergence orders against cached reference
//! solutions.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod physics;
pub mod spectral;

pub use error::{Error, Result};

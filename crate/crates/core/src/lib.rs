//! Numerical laboratory for the stochastic heat equation ∂ₜU = ∂ₓ²U + Ẇ:
//! heat kernels, fractional time operators, Brownian-sheet integrals,
//! the spatial SDE for (U(x,·), ∂ₓU(x,·)), and verification suites.

pub mod config;
pub mod error;
pub mod fracops;
pub mod gaussfield;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod quad;
pub mod sde;
pub mod special;
pub mod stats;
pub mod suites;

pub use error::{Error, Result};

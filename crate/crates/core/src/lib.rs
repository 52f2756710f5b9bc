//! Pseudo-spectral simulator and verification harness for compressible
//! Navier-Stokes with a transported entropy variable.

// `!(x > 0.0)` rejects NaN parameters along with non-positive ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod galerkin;
pub mod io;
pub mod operators;

pub use error::{Error, Result};

//! Random-matrix tools for grid situation awareness.

pub mod covtest;
pub mod error;
pub mod freeprob;
pub mod gridsim;
pub mod ensembles;
pub mod laws;
pub mod linalg;
pub mod sa;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;

//! Numerical laboratory for non-Hermitian Hamiltonians with future boundary
//! conditions.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod classical;
pub mod emergence;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod maximization;
pub mod qmetric;
pub mod random;
pub mod scenario;

pub use error::{Error, Result};

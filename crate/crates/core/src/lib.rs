//! Finite-element solver for regularized Bingham (viscoplastic) flow with
//! Picard and Anderson-accelerated Picard nonlinear iterations.

// Index loops mirror the element formulas; `!(a <= b)` is used on purpose so NaN fails checks.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod anderson;
pub mod assembly;
pub mod error;
pub mod fixed_point;
pub mod linsolve;
pub mod mesh;
pub mod problems;
pub mod spaces;
pub mod sparse;

pub use error::{Error, Result};

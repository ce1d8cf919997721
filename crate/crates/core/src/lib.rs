//! Numerical toolkit around metric almost complex structures and holonomy.

// Checks are written `!(x <= tol)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acs;
pub mod cli;
pub mod delta;
pub mod error;
pub mod holonomy;
pub mod karcher;
pub mod linalg;
pub mod matrix_json;
pub mod prober;

pub use error::{Error, Result};

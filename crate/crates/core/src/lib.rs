//! Monte-Carlo and quadrature toolkit for Wick-renormalized squares of
//! mollified Brownian noise integrated against local time, and the
//! integration-by-parts identities they satisfy on Wiener space.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod closedform;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod kernels;
pub mod localtime;
pub mod paths;
pub mod quad;
pub mod semigroup;

pub use error::{Error, Result};

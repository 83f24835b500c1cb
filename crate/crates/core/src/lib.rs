//! Computable pieces of the functional limit law for local empirical
//! increments under Erdős–Rényi bandwidths `h_n = c log n / n`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chernoff;
pub mod error;

pub use error::{Error, Result};
pub mod grid;
pub mod projection;
pub mod rate;
pub mod sampling;
pub mod increments;
pub mod kde;
pub mod experiments;

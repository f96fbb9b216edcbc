//! Annealed skewed SGD for training models whose weights must land on a
//! finite set of quantization levels.
//!
//! The quantization constraint `w_i in {c_1, ..., c_K}` is relaxed to the
//! smooth interval constraints `psi_eps(w_i) >= 0`; each relaxed problem is
//! solved with a stochastic feasible-direction method whose velocity is the
//! point of a local polyhedron closest to the negative gradient, and `eps` is
//! annealed towards zero between episodes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod models;
pub mod optimizer;
pub mod quantizer;
pub mod skew;

pub use error::{Error, Result};
pub use quantizer::{ConstraintParams, Levels, QuantGrid};
pub use skew::{skew_direction, SkewStep};

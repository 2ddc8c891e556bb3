//! Gait-based depression-risk recognition from binary silhouette sequences.

// `!(x > 0.0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod seed;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

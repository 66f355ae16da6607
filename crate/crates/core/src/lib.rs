//! Numerical laboratory for contrastive self-supervised losses.
//!
//! The InfoNCE gradient on an anchor factors into an anchor-wise scalar
//! (`sum_j p_j`, how hard the anchor is) and a direction (`k+ - sum_j p_hat_j k_j`,
//! which negatives are hard). This crate implements that split, losses that
//! control the two parts with separate temperatures, a FIFO key dictionary,
//! diagnostics on the anchor weights, and a small MLP training harness for
//! comparing framework variants on synthetic data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod dictionary;
pub mod error;
pub mod experiment;
pub mod gradients;
pub mod losses;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};

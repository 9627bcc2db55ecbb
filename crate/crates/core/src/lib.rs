//! Ray-based classification of double-quantum-dot states.
//!
//! The pipeline measures `M` evenly spaced rays around a point in plunger
//! space, locates the nearest charge-transition peak on each ray, weights
//! those distances into a fingerprint, and feeds the fingerprint to a small
//! dense network that returns a probability vector over five device states.
//! A Nelder-Mead tuner closes the loop on top of the classifier.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autotune;
pub mod classifier;
pub mod error;
pub mod fingerprint;
pub mod qdsim;
pub mod rayscan;
pub mod seed;
pub mod sigproc;

pub use error::{RbcError, Result};

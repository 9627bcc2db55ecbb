//! Dataset generation, sweeps, tuning campaigns and file formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod experiments;
pub mod io;
pub mod reduction;
pub mod sweep;

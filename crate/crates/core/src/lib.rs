//! Allocation-only kernels for query-by-example spoken term detection.
//!
//! Everything in this crate is pure computation over in-memory buffers:
//! the MFCC front-end and 2x decimator, the windowed DTW detector, the
//! term-weighted-value evaluator with its significance tests, and the
//! classical MDS feature-space analysis. File formats, audio decoding,
//! the parallel corpus scan and the command-line driver live in the
//! `qbestd` crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is deliberate: it rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod dtw;
pub mod eval;
pub mod features;
pub mod mfcc;
pub mod resample;

mod error;
mod fft;

pub use error::{Error, Result};
pub use features::{AudioBuffer, FeatureMatrix};

//! Core algorithms for a three-pathway network that restores and classifies
//! structurally corrupted character images from one shared hidden code.
//!
//! The crate is `#![no_std]` (it needs `alloc`) and performs no IO. File
//! formats, the command line, and threading live in the `tripath` crate.
//!
//! Module map:
//!
//! - [`numerics`]: dense row-major [`Matrix`] and the splitmix64 [`Rng`].
//! - [`data`]: image datasets, triplets, one-hot labels, splitting.
//! - [`noise`]: the two structured-noise generators.
//! - [`rbm`]: Bernoulli RBMs trained with CD-1 and greedy stacking.
//! - [`network`]: the joint model, its loss, and exact backpropagation.
//! - [`optim`]: SGD with momentum, L-BFGS, and the pipeline baseline.
//! - [`eval`]: PSNR, error rate, confusion matrices.
//!
//! Orientation is fixed throughout: rows are examples, columns are features.

#![cfg_attr(not(test), no_std)]
// Negated float comparisons are how validation rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod network;
pub mod noise;
pub mod numerics;
pub mod optim;
pub mod rbm;

pub use error::{Error, Result};
pub use numerics::{Matrix, Rng};

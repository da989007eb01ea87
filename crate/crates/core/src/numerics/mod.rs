//! Dense linear algebra and the deterministic random source everything else
//! builds on.

mod matrix;
mod rng;

pub use matrix::{sigmoid, Matrix};
pub use rng::{derive_seed, Rng};

//! The three-pathway joint model.
//!
//! A shared sigmoid encoder maps a noisy image to a hidden code `h`. Two
//! decoders read `h`: one reconstructs the clean image, the other scores the
//! classes with independent sigmoids. Training minimizes
//!
//! ```text
//! L = -Σ [v ln v̂ + (1 - v) ln(1 - v̂)] - λ Σ [y ln ŷ + (1 - y) ln(1 - ŷ)]
//! ```
//!
//! summed over examples and entries. During backpropagation the gradient
//! reaching `h` is the sum of what the two decoders send back.

mod classifier;
mod layer;
mod tripath;

use alloc::vec::Vec;
use core::ops::{Add, Deref, DerefMut};

use crate::data::TripletDataset;
use crate::error::Result;
use crate::exec::Executor;

pub use classifier::Classifier;
pub use layer::Layer;
pub use tripath::{Architecture, LabelHead, NetShape, Prediction, TriPathNet};

/// Summed loss of a batch, split by pathway.
///
/// `label` is the unweighted label cross-entropy; `total = image + λ·label`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub image: f64,
    pub label: f64,
}

impl LossTerms {
    pub fn scaled(self, factor: f64) -> LossTerms {
        LossTerms {
            total: self.total * factor,
            image: self.image * factor,
            label: self.label * factor,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.image.is_finite() && self.label.is_finite()
    }
}

impl Add for LossTerms {
    type Output = LossTerms;

    fn add(self, rhs: LossTerms) -> LossTerms {
        LossTerms {
            total: self.total + rhs.total,
            image: self.image + rhs.image,
            label: self.label + rhs.label,
        }
    }
}

/// All parameters of a model in its canonical flat order.
///
/// For [`TriPathNet`]: encoder layers, then image-decoder layers, then
/// label-decoder layers; within a layer the weight matrix row-major, then
/// the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// What the optimizers need from a trainable model.
pub trait Model: Clone + Send + Sync {
    fn num_params(&self) -> usize;

    fn flatten(&self) -> ParamVector;

    /// Same architecture with new parameters.
    fn with_params(&self, params: &[f64]) -> Result<Self>;

    /// Summed loss over `data`.
    fn loss(&self, data: &TripletDataset) -> Result<LossTerms>;

    /// Summed loss over `data` and its exact gradient.
    fn loss_and_gradient(&self, data: &TripletDataset, exec: &dyn Executor) -> Result<(LossTerms, ParamVector)>;
}

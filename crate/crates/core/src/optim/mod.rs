//! Fine-tuning: minibatch SGD with momentum, L-BFGS, and the drivers that
//! train the joint model and the pipeline baseline.
//!
//! Optimizers work on the mean loss (summed loss divided by the number of
//! examples), so step sizes do not depend on the dataset size. They never
//! modify the model they are given; they return a new one.

mod lbfgs;
mod pipeline;
mod sgd;

use alloc::vec::Vec;

use crate::exec::{Executor, Serial};
use crate::network::LossTerms;

pub use lbfgs::{
    lbfgs_minimize, lbfgs_train, two_loop_direction, CurvaturePair, LbfgsConfig, LbfgsOutcome, LbfgsStatus,
};
pub use pipeline::{fine_tune, initialize, pipeline_baseline_train, train_joint, JointRun, PipelineModels, TrainPlan};
pub use sgd::{sgd_train, SgdConfig};

/// Which optimizer fine-tunes the model.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum OptimizerConfig {
    Sgd(SgdConfig),
    Lbfgs(LbfgsConfig),
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Lbfgs(LbfgsConfig::default())
    }
}

/// One evaluation during training. Loss values are means per example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub loss: f64,
    pub image_term: f64,
    pub label_term: f64,
    pub seconds: f64,
}

/// Training curve; iterations are strictly increasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

impl TrainHistory {
    pub(crate) fn push(&mut self, iteration: usize, mean: LossTerms, seconds: f64) -> HistoryRecord {
        debug_assert!(self.records.last().map_or(true, |r| r.iteration < iteration));
        let record = HistoryRecord {
            iteration,
            loss: mean.total,
            image_term: mean.image,
            label_term: mean.label,
            seconds,
        };
        self.records.push(record);
        record
    }

    pub fn first(&self) -> Option<&HistoryRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&HistoryRecord> {
        self.records.last()
    }
}

/// Timing and progress callbacks supplied by the caller.
pub trait Hooks: Sync {
    /// Seconds since some fixed start; the core crate has no clock.
    fn seconds(&self) -> f64 {
        0.0
    }

    fn on_record(&self, _stage: &str, _record: &HistoryRecord) {}
}

/// No clock, no reporting.
#[derive(Clone, Copy, Debug, Default)]
pub struct Silent;

impl Hooks for Silent {}

/// Where shard work runs and who hears about progress.
#[derive(Clone, Copy)]
pub struct Context<'a> {
    pub exec: &'a dyn Executor,
    pub hooks: &'a dyn Hooks,
}

impl Context<'static> {
    pub fn serial() -> Self {
        Context {
            exec: &Serial,
            hooks: &Silent,
        }
    }
}

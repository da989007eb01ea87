use alloc::vec::Vec;

use super::{lbfgs_train, sgd_train, Context, OptimizerConfig, TrainHistory};
use crate::data::TripletDataset;
use crate::error::Result;
use crate::eval::Predictor;
use crate::network::{Architecture, Classifier, Model, Prediction, TriPathNet};
use crate::numerics::{derive_seed, Matrix};
use crate::rbm::{pretrain_stack, PretrainConfig, PretrainedStack, Rbm};

/// How a network is initialized and fine-tuned.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainPlan {
    /// `None` skips pretraining and starts from Glorot-uniform weights.
    pub pretrain: Option<PretrainConfig>,
    pub optimizer: OptimizerConfig,
    /// Root seed for pretraining and head initialization.
    pub seed: u64,
}

impl Default for TrainPlan {
    fn default() -> Self {
        TrainPlan {
            pretrain: Some(PretrainConfig::default()),
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

const PRETRAIN_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;

impl TrainPlan {
    /// Seed for [`pretrain_stack`].
    pub fn pretrain_seed(&self) -> u64 {
        derive_seed(self.seed, PRETRAIN_STREAM)
    }

    /// Seed for random weights or the fresh label layer.
    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, INIT_STREAM)
    }
}

/// Result of initializing and fine-tuning a joint network.
#[derive(Clone, Debug)]
pub struct JointRun {
    pub net: TriPathNet,
    pub stack: Option<PretrainedStack>,
    pub history: TrainHistory,
}

/// Runs the configured optimizer on `model`.
pub fn fine_tune<M: Model>(
    model: &M,
    data: &TripletDataset,
    optimizer: &OptimizerConfig,
    ctx: Context<'_>,
) -> Result<(M, TrainHistory)> {
    match optimizer {
        OptimizerConfig::Sgd(cfg) => sgd_train(model, data, cfg, ctx),
        OptimizerConfig::Lbfgs(cfg) => lbfgs_train(model, data, cfg, ctx).map(|(m, h, _)| (m, h)),
    }
}

/// Unrolls `stack` into a network, or draws random weights without one.
pub fn initialize(stack: Option<&[Rbm]>, arch: &Architecture, lambda: f64, plan: &TrainPlan) -> Result<TriPathNet> {
    match stack {
        Some(rbms) => TriPathNet::init_from_pretrain(rbms, arch, lambda, plan.init_seed()),
        None => TriPathNet::random(arch, lambda, plan.init_seed()),
    }
}

fn initial_net(
    inputs: &Matrix,
    arch: &Architecture,
    lambda: f64,
    plan: &TrainPlan,
) -> Result<(TriPathNet, Option<PretrainedStack>)> {
    let stack = match &plan.pretrain {
        Some(cfg) => Some(pretrain_stack(&arch.encoder_dims(), inputs, cfg, plan.pretrain_seed())?),
        None => None,
    };
    let net = initialize(stack.as_ref().map(|s| s.rbms.as_slice()), arch, lambda, plan)?;
    Ok((net, stack))
}

/// Pretrains on the noisy inputs (if configured), unrolls, and fine-tunes
/// the joint objective with label weight `lambda`.
pub fn train_joint(
    data: &TripletDataset,
    arch: &Architecture,
    lambda: f64,
    plan: &TrainPlan,
    ctx: Context<'_>,
) -> Result<JointRun> {
    let (net, stack) = initial_net(data.noisy(), arch, lambda, plan)?;
    let (net, history) = fine_tune(&net, data, &plan.optimizer, ctx)?;
    Ok(JointRun { net, stack, history })
}

/// A denoiser trained alone, feeding a classifier trained on its output.
#[derive(Clone, Debug)]
pub struct PipelineModels {
    pub denoiser: TriPathNet,
    pub classifier: Classifier,
    pub denoiser_history: TrainHistory,
    pub classifier_history: TrainHistory,
}

impl Predictor for PipelineModels {
    fn predict(&self, noisy: &Matrix) -> Result<Prediction> {
        let images = self.denoiser.predict(noisy)?.images;
        let scores = self.classifier.scores(&images)?;
        let classes: Vec<usize> = scores.argmax_rows();
        Ok(Prediction {
            images,
            scores,
            classes,
        })
    }
}

/// Trains the two-stage baseline with the same architecture and budget as
/// the joint model: a denoiser with `lambda = 0`, then a classifier
/// (pretrained on the denoised training images when pretraining is on)
/// fitted to the denoised images and the labels.
pub fn pipeline_baseline_train(
    data: &TripletDataset,
    arch: &Architecture,
    plan: &TrainPlan,
    ctx: Context<'_>,
) -> Result<PipelineModels> {
    let stage1 = train_joint(data, arch, 0.0, plan, ctx)?;
    let denoised = stage1.net.predict(data.noisy())?.images;
    let stage2_data = data.with_noisy(denoised)?;
    let (init, _) = initial_net(stage2_data.noisy(), arch, 1.0, plan)?;
    let (classifier, classifier_history) = fine_tune(&Classifier::from_net(&init), &stage2_data, &plan.optimizer, ctx)?;
    Ok(PipelineModels {
        denoiser: stage1.net,
        classifier,
        denoiser_history: stage1.history,
        classifier_history,
    })
}

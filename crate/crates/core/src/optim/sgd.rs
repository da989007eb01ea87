use alloc::vec;
use alloc::vec::Vec;

use super::{Context, TrainHistory};
use crate::data::{Rows, TripletDataset};
use crate::error::{Error, Result};
use crate::network::{LossTerms, Model};
use crate::numerics::Rng;

/// Epochs in a row whose loss exceeds this multiple of the starting loss
/// before training is declared divergent.
const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_PATIENCE: usize = 3;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SgdConfig {
    pub learning_rate: f64,
    /// Classical momentum coefficient in [0, 1).
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            batch_size: 100,
            epochs: 30,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::contract("learning rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::contract("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::contract("batch size must be positive"));
        }
        Ok(())
    }
}

/// Minibatch SGD with classical momentum on the mean loss.
///
/// The history holds the full-data loss before training (iteration 0) and,
/// for each epoch, the mean of the minibatch losses seen during that epoch.
/// Fails with [`Error::Diverged`] when three consecutive epochs end above
/// ten times the starting loss.
pub fn sgd_train<M: Model>(
    model: &M,
    data: &TripletDataset,
    cfg: &SgdConfig,
    ctx: Context<'_>,
) -> Result<(M, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    let n = data.len();
    let mut history = TrainHistory::default();
    let initial = model.loss(data)?.scaled(1.0 / n as f64);
    let record = history.push(0, initial, ctx.hooks.seconds());
    ctx.hooks.on_record("sgd", &record);

    let mut params = model.flatten().0;
    let mut velocity = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::new(cfg.seed);
    let mut current = model.clone();
    let mut strikes = 0;
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut seen = LossTerms::default();
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select(chunk)?;
            let (terms, grad) = current.loss_and_gradient(&batch, ctx.exec)?;
            seen = seen + terms;
            let step = cfg.learning_rate / chunk.len() as f64;
            for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grad.iter()) {
                *v = cfg.momentum * *v - step * g;
                *p += *v;
            }
            current = current.with_params(&params)?;
        }
        let mean = seen.scaled(1.0 / n as f64);
        if !mean.is_finite() {
            return Err(Error::non_finite("SGD epoch loss"));
        }
        let record = history.push(epoch, mean, ctx.hooks.seconds());
        ctx.hooks.on_record("sgd", &record);
        if mean.total > DIVERGENCE_FACTOR * initial.total {
            strikes += 1;
            if strikes >= DIVERGENCE_PATIENCE {
                return Err(Error::Diverged {
                    epoch,
                    loss: mean.total,
                    initial: initial.total,
                });
            }
        } else {
            strikes = 0;
        }
    }
    Ok((current, history))
}

//! Bernoulli-Bernoulli restricted Boltzmann machines, CD-1 training, and
//! greedy layer-wise stacking used to initialize the encoder.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Matrix, Rng};

/// Probabilities are clamped to `[EPS, 1 - EPS]` inside logarithms.
pub(crate) const LOG_EPS: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct Rbm {
    /// Visible x hidden.
    pub w: Matrix,
    /// 1 x visible.
    pub b_vis: Matrix,
    /// 1 x hidden.
    pub b_hid: Matrix,
}

/// Result of one CD-1 step.
#[derive(Clone, Debug, PartialEq)]
pub struct CdStep {
    pub rbm: Rbm,
    /// Mean over the batch of the summed Bernoulli cross-entropy between the
    /// data and its one-step reconstruction.
    pub recon_ce: f64,
}

impl Rbm {
    pub fn new(w: Matrix, b_vis: Matrix, b_hid: Matrix) -> Result<Self> {
        if b_vis.shape() != (1, w.rows()) {
            return Err(Error::Shape {
                op: "rbm visible bias",
                left: w.shape(),
                right: b_vis.shape(),
            });
        }
        if b_hid.shape() != (1, w.cols()) {
            return Err(Error::Shape {
                op: "rbm hidden bias",
                left: w.shape(),
                right: b_hid.shape(),
            });
        }
        Ok(Rbm { w, b_vis, b_hid })
    }

    /// Weights uniform in (-0.1, 0.1), zero biases.
    pub fn random(visible: usize, hidden: usize, rng: &mut Rng) -> Self {
        Rbm {
            w: Matrix::from_fn(visible, hidden, |_, _| rng.uniform(-0.1, 0.1)),
            b_vis: Matrix::zeros(1, visible),
            b_hid: Matrix::zeros(1, hidden),
        }
    }

    pub fn visible(&self) -> usize {
        self.w.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w.cols()
    }

    /// `p(h = 1 | v)` for a batch of visible rows.
    pub fn prop_up(&self, v: &Matrix) -> Result<Matrix> {
        let mut h = v.matmul(&self.w)?;
        h.add_row_in_place(&self.b_hid)?;
        h.sigmoid_in_place();
        Ok(h)
    }

    /// `p(v = 1 | h)` for a batch of hidden rows.
    pub fn prop_down(&self, h: &Matrix) -> Result<Matrix> {
        let mut v = h.matmul_nt(&self.w)?;
        v.add_row_in_place(&self.b_vis)?;
        v.sigmoid_in_place();
        Ok(v)
    }

    /// One contrastive-divergence step on a batch.
    ///
    /// Hidden states are sampled once from `p(h | v0)` in row-major order;
    /// the reconstruction `v1` and the negative hidden statistics `h1` are
    /// probabilities. The update is
    /// `dW = (v0ᵀ p(h|v0) - v1ᵀ h1) / batch`, with matching bias terms, and
    /// every parameter moves by `lr * d`.
    pub fn cd1_update(&self, v0: &Matrix, lr: f64, rng: &mut Rng) -> Result<CdStep> {
        if v0.cols() != self.visible() {
            return Err(Error::Shape {
                op: "cd1_update",
                left: v0.shape(),
                right: self.w.shape(),
            });
        }
        let batch = v0.rows();
        if batch == 0 {
            return Err(Error::contract("cd1_update needs a nonempty batch"));
        }
        let p0 = self.prop_up(v0)?;
        let h0 = p0.map(|p| if rng.bernoulli(p) { 1.0 } else { 0.0 });
        let v1 = self.prop_down(&h0)?;
        let h1 = self.prop_up(&v1)?;

        let scale = lr / batch as f64;
        let positive = v0.matmul_tn(&p0)?;
        let negative = v1.matmul_tn(&h1)?;
        let w = self.w.add(&positive.sub(&negative)?.scale(scale))?;
        let b_vis = self.b_vis.add(&v0.sub(&v1)?.sum_rows().scale(scale))?;
        let b_hid = self.b_hid.add(&p0.sub(&h1)?.sum_rows().scale(scale))?;

        let recon_ce = bernoulli_cross_entropy(v0, &v1) / batch as f64;
        if !(w.is_finite() && b_vis.is_finite() && b_hid.is_finite() && recon_ce.is_finite()) {
            return Err(Error::non_finite("CD-1 update produced a non-finite value"));
        }
        Ok(CdStep {
            rbm: Rbm { w, b_vis, b_hid },
            recon_ce,
        })
    }
}

/// `-Σ t ln p + (1 - t) ln(1 - p)` over all entries, with `p` clamped.
pub(crate) fn bernoulli_cross_entropy(target: &Matrix, predicted: &Matrix) -> f64 {
    target
        .as_slice()
        .iter()
        .zip(predicted.as_slice())
        .map(|(&t, &p)| {
            let p = p.clamp(LOG_EPS, 1.0 - LOG_EPS);
            -(t * libm::log(p) + (1.0 - t) * libm::log(1.0 - p))
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PretrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 5,
            learning_rate: 0.1,
            batch_size: 100,
        }
    }
}

/// Mean reconstruction cross-entropy of one epoch of one layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub layer: usize,
    pub epoch: usize,
    pub recon_ce: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedStack {
    pub rbms: Vec<Rbm>,
    pub curve: Vec<EpochRecord>,
}

impl PretrainedStack {
    /// Per-epoch values for one layer, in epoch order.
    pub fn layer_curve(&self, layer: usize) -> Vec<f64> {
        self.curve
            .iter()
            .filter(|r| r.layer == layer)
            .map(|r| r.recon_ce)
            .collect()
    }
}

/// Greedy layer-wise training of RBMs of sizes `layer_sizes[l] -> layer_sizes[l + 1]`.
///
/// Layer `l` draws its initialization and minibatch order from
/// `derive_seed(seed, l)`. Each trained layer's `prop_up` probabilities are
/// the next layer's data.
pub fn pretrain_stack(
    layer_sizes: &[usize],
    data: &Matrix,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<PretrainedStack> {
    if layer_sizes.len() < 2 {
        return Err(Error::contract("pretraining needs at least two layer sizes"));
    }
    if data.cols() != layer_sizes[0] {
        return Err(Error::contract(format!(
            "data has {} columns but the first layer expects {}",
            data.cols(),
            layer_sizes[0]
        )));
    }
    if cfg.epochs > 0 && (cfg.batch_size == 0 || data.rows() == 0) {
        return Err(Error::contract("pretraining needs data and a positive batch size"));
    }

    let mut rbms = Vec::with_capacity(layer_sizes.len() - 1);
    let mut curve = Vec::new();
    let mut layer_data = data.clone();
    for (layer, pair) in layer_sizes.windows(2).enumerate() {
        let mut rng = Rng::new(derive_seed(seed, layer as u64));
        let mut rbm = Rbm::random(pair[0], pair[1], &mut rng);
        let mut order: Vec<usize> = (0..layer_data.rows()).collect();
        for epoch in 0..cfg.epochs {
            rng.shuffle(&mut order);
            let mut total = 0.0;
            for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
                let v0 = layer_data.select_rows(batch)?;
                let step = rbm.cd1_update(&v0, cfg.learning_rate, &mut rng).map_err(|e| match e {
                    Error::NonFinite(msg) => {
                        Error::non_finite(format!("layer {layer} epoch {epoch} batch {batch_index}: {msg}"))
                    }
                    other => other,
                })?;
                total += step.recon_ce * batch.len() as f64;
                rbm = step.rbm;
            }
            curve.push(EpochRecord {
                layer,
                epoch,
                recon_ce: total / layer_data.rows() as f64,
            });
        }
        if layer + 2 < layer_sizes.len() {
            layer_data = rbm.prop_up(&layer_data)?;
        }
        rbms.push(rbm);
    }
    Ok(PretrainedStack { rbms, curve })
}

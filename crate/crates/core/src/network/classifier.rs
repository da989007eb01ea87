use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::layer::{backward_stack, forward_stack, run_stack, stack_params, Layer};
use super::{LossTerms, Model, ParamVector, TriPathNet};
use crate::data::TripletDataset;
use crate::error::{Error, Result};
use crate::exec::{self, Executor};
use crate::numerics::Matrix;
use crate::rbm::bernoulli_cross_entropy;

/// A plain sigmoid classifier: encoder layers followed by a label head,
/// trained on the label cross-entropy alone. It reads the `noisy` column of
/// a triplet set and ignores `clean`.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    layers: Vec<Layer>,
}

impl Classifier {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("a classifier needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::contract("classifier layers do not chain"));
            }
        }
        Ok(Classifier { layers })
    }

    /// The encoder and label decoder of `net`, composed.
    pub fn from_net(net: &TriPathNet) -> Self {
        let mut layers = net.encoder().to_vec();
        layers.extend_from_slice(net.decoder_lab());
        Classifier { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape {
                op: "classify",
                left: x.shape(),
                right: self.layers[0].w.shape(),
            });
        }
        Ok(())
    }

    fn check_data(&self, data: &TripletDataset) -> Result<()> {
        self.check(data.noisy())?;
        if data.num_classes() != self.num_classes() {
            return Err(Error::contract(format!(
                "data has {} classes, the classifier {}",
                data.num_classes(),
                self.num_classes()
            )));
        }
        Ok(())
    }

    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        run_stack(&self.layers, x)
    }

    pub fn classify(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.scores(x)?.argmax_rows())
    }

    fn backprop(&self, data: &TripletDataset) -> Result<(LossTerms, Vec<f64>)> {
        let acts = forward_stack(&self.layers, data.noisy())?;
        let y_hat = acts.last().unwrap();
        let label = bernoulli_cross_entropy(data.labels_onehot(), y_hat);
        let mut grad = vec![0.0; self.num_params()];
        let delta = y_hat.sub(data.labels_onehot())?;
        backward_stack(&self.layers, data.noisy(), &acts, delta, &mut grad, false)?;
        if !label.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::non_finite("classifier loss or gradient"));
        }
        Ok((
            LossTerms {
                total: label,
                image: 0.0,
                label,
            },
            grad,
        ))
    }
}

impl Model for Classifier {
    fn num_params(&self) -> usize {
        stack_params(&self.layers)
    }

    fn flatten(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            layer.write_params(&mut out);
        }
        ParamVector(out)
    }

    fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.num_params() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            layers.push(Layer::read_params(l.inputs(), l.outputs(), &params[offset..])?);
            offset += l.num_params();
        }
        Classifier::new(layers)
    }

    fn loss(&self, data: &TripletDataset) -> Result<LossTerms> {
        self.check_data(data)?;
        let mut label = 0.0;
        for range in exec::shards(data.len()) {
            let part = data.slice(range);
            label += bernoulli_cross_entropy(part.labels_onehot(), &self.scores(part.noisy())?);
        }
        if !label.is_finite() {
            return Err(Error::non_finite("classifier loss"));
        }
        Ok(LossTerms {
            total: label,
            image: 0.0,
            label,
        })
    }

    fn loss_and_gradient(&self, data: &TripletDataset, exec: &dyn Executor) -> Result<(LossTerms, ParamVector)> {
        self.check_data(data)?;
        let shards = exec::shards(data.len());
        let parts = exec.run(shards.len(), &|i| self.backprop(&data.slice(shards[i].clone())));
        let (terms, grad) = exec::reduce(parts, self.num_params())?;
        Ok((terms, ParamVector(grad)))
    }
}

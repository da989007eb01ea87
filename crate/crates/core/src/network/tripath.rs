use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::layer::{backward_stack, forward_stack, run_stack, sigmoid_delta, stack_params, Layer};
use super::{LossTerms, Model, ParamVector};
use crate::data::TripletDataset;
use crate::error::{Error, Result};
use crate::exec::{self, Executor, Serial};
use crate::numerics::{Matrix, Rng};
use crate::rbm::{bernoulli_cross_entropy, Rbm};

/// Shape of the label pathway.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LabelHead {
    /// Mirrors the encoder (like the image decoder) with the last layer
    /// resized to the number of classes.
    #[default]
    Deep,
    /// A single layer from the shared code to the classes.
    Shallow,
}

/// Layer sizes of a joint model.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    /// Hidden sizes of the encoder; the last one is the shared code.
    pub encoder: Vec<usize>,
    pub num_classes: usize,
    pub label_head: LabelHead,
}

impl Architecture {
    pub fn new(input_dim: usize, encoder: Vec<usize>, num_classes: usize, label_head: LabelHead) -> Result<Self> {
        if encoder.is_empty() {
            return Err(Error::contract("the encoder needs at least one layer"));
        }
        if input_dim == 0 || num_classes == 0 || encoder.contains(&0) {
            return Err(Error::contract("layer sizes must be positive"));
        }
        Ok(Architecture {
            input_dim,
            encoder,
            num_classes,
            label_head,
        })
    }

    /// 784 -> 400 -> 200 -> 250 -> 100 with ten classes.
    pub fn mnist() -> Self {
        Architecture {
            input_dim: 784,
            encoder: vec![400, 200, 250, 100],
            num_classes: 10,
            label_head: LabelHead::Deep,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        *self.encoder.last().expect("nonempty encoder")
    }

    /// `[D, n1, ..., nL]`.
    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend_from_slice(&self.encoder);
        dims
    }

    /// `[nL, ..., n1, D]`.
    pub fn image_decoder_dims(&self) -> Vec<usize> {
        let mut dims = self.encoder_dims();
        dims.reverse();
        dims
    }

    /// `[nL, ..., n1, K]` for the deep head, `[nL, K]` for the shallow one.
    pub fn label_decoder_dims(&self) -> Vec<usize> {
        match self.label_head {
            LabelHead::Deep => {
                let mut dims = self.image_decoder_dims();
                *dims.last_mut().unwrap() = self.num_classes;
                dims
            }
            LabelHead::Shallow => vec![self.hidden_dim(), self.num_classes],
        }
    }
}

fn stack_from_dims(dims: &[usize], mut make: impl FnMut(usize, usize) -> Layer) -> Vec<Layer> {
    dims.windows(2).map(|p| make(p[0], p[1])).collect()
}

/// Per-pathway `(inputs, outputs)` of every layer, plus λ. Enough to
/// rebuild a network from a [`ParamVector`].
#[derive(Clone, Debug, PartialEq)]
pub struct NetShape {
    pub encoder: Vec<(usize, usize)>,
    pub decoder_img: Vec<(usize, usize)>,
    pub decoder_lab: Vec<(usize, usize)>,
    pub lambda: f64,
}

impl NetShape {
    fn layers(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.encoder.iter().chain(&self.decoder_img).chain(&self.decoder_lab)
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(|&(i, o)| i * o + o).sum()
    }

    pub fn unflatten(&self, params: &[f64]) -> Result<TriPathNet> {
        if params.len() != self.num_params() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut offset = 0;
        let mut read = |dims: &[(usize, usize)]| -> Result<Vec<Layer>> {
            dims.iter()
                .map(|&(i, o)| {
                    let layer = Layer::read_params(i, o, &params[offset..])?;
                    offset += i * o + o;
                    Ok(layer)
                })
                .collect()
        };
        let encoder = read(&self.encoder)?;
        let decoder_img = read(&self.decoder_img)?;
        let decoder_lab = read(&self.decoder_lab)?;
        TriPathNet::new(encoder, decoder_img, decoder_lab, self.lambda)
    }
}

/// Reconstructed images and class scores from one shared encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub images: Matrix,
    pub scores: Matrix,
    pub classes: Vec<usize>,
}

/// Shared encoder, image decoder and label decoder, plus the label-loss
/// weight λ.
#[derive(Clone, Debug, PartialEq)]
pub struct TriPathNet {
    encoder: Vec<Layer>,
    decoder_img: Vec<Layer>,
    decoder_lab: Vec<Layer>,
    lambda: f64,
}

fn check_chain(name: &str, layers: &[Layer]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::contract(format!("{name} has no layers")));
    }
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[0].outputs() != pair[1].inputs() {
            return Err(Error::contract(format!(
                "{name}: layer {i} emits {} values but layer {} takes {}",
                pair[0].outputs(),
                i + 1,
                pair[1].inputs()
            )));
        }
    }
    if !layers.iter().all(Layer::is_finite) {
        return Err(Error::non_finite(format!("{name} has non-finite parameters")));
    }
    Ok(())
}

fn shapes(layers: &[Layer]) -> Vec<(usize, usize)> {
    layers.iter().map(|l| (l.inputs(), l.outputs())).collect()
}

impl TriPathNet {
    pub fn new(encoder: Vec<Layer>, decoder_img: Vec<Layer>, decoder_lab: Vec<Layer>, lambda: f64) -> Result<Self> {
        check_chain("encoder", &encoder)?;
        check_chain("image decoder", &decoder_img)?;
        check_chain("label decoder", &decoder_lab)?;
        let hidden = encoder.last().unwrap().outputs();
        if decoder_img[0].inputs() != hidden || decoder_lab[0].inputs() != hidden {
            return Err(Error::contract(format!(
                "decoders must read the {hidden}-unit shared code"
            )));
        }
        if decoder_img.last().unwrap().outputs() != encoder[0].inputs() {
            return Err(Error::contract("image decoder must emit the input dimension"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::contract(format!("lambda {lambda} must be finite and >= 0")));
        }
        Ok(TriPathNet {
            encoder,
            decoder_img,
            decoder_lab,
            lambda,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(arch: &Architecture, lambda: f64) -> Result<Self> {
        TriPathNet::new(
            stack_from_dims(&arch.encoder_dims(), Layer::zeros),
            stack_from_dims(&arch.image_decoder_dims(), Layer::zeros),
            stack_from_dims(&arch.label_decoder_dims(), Layer::zeros),
            lambda,
        )
    }

    /// Glorot-uniform weights, zero biases. Used when pretraining is skipped.
    pub fn random(arch: &Architecture, lambda: f64, seed: u64) -> Result<Self> {
        let mut rng = Rng::new(seed);
        let mut make = |i: usize, o: usize| {
            let range = libm::sqrt(6.0 / (i + o) as f64);
            Layer::uniform(i, o, range, &mut rng)
        };
        let encoder = stack_from_dims(&arch.encoder_dims(), &mut make);
        let decoder_img = stack_from_dims(&arch.image_decoder_dims(), &mut make);
        let decoder_lab = stack_from_dims(&arch.label_decoder_dims(), &mut make);
        TriPathNet::new(encoder, decoder_img, decoder_lab, lambda)
    }

    /// Builds the network from a greedily pretrained RBM stack.
    ///
    /// Encoder layer `l` takes RBM `l`'s weights and hidden bias. The image
    /// decoder unrolls the stack in reverse with transposed weights and
    /// visible biases, as independent copies. The deep label decoder copies
    /// that mirror except its last layer, which maps to the classes with
    /// weights uniform in (-0.1, 0.1) drawn from `seed`; the shallow head
    /// is that single random layer.
    pub fn init_from_pretrain(stack: &[Rbm], arch: &Architecture, lambda: f64, seed: u64) -> Result<Self> {
        let dims = arch.encoder_dims();
        if stack.len() != arch.encoder.len() {
            return Err(Error::contract(format!(
                "{} pretrained layers for a {}-layer encoder",
                stack.len(),
                arch.encoder.len()
            )));
        }
        for (l, rbm) in stack.iter().enumerate() {
            if (rbm.visible(), rbm.hidden()) != (dims[l], dims[l + 1]) {
                return Err(Error::contract(format!(
                    "RBM {l} is {}x{} but the encoder needs {}x{}",
                    rbm.visible(),
                    rbm.hidden(),
                    dims[l],
                    dims[l + 1]
                )));
            }
        }
        let encoder: Vec<Layer> = stack
            .iter()
            .map(|r| Layer::new(r.w.clone(), r.b_hid.clone()))
            .collect::<Result<_>>()?;
        let mirror: Vec<Layer> = stack
            .iter()
            .rev()
            .map(|r| Layer::new(r.w.transpose(), r.b_vis.clone()))
            .collect::<Result<_>>()?;
        let mut rng = Rng::new(seed);
        let decoder_lab = match arch.label_head {
            LabelHead::Deep => {
                let mut layers = mirror[..mirror.len() - 1].to_vec();
                let last_in = dims[1];
                layers.push(Layer::uniform(last_in, arch.num_classes, 0.1, &mut rng));
                layers
            }
            LabelHead::Shallow => {
                vec![Layer::uniform(arch.hidden_dim(), arch.num_classes, 0.1, &mut rng)]
            }
        };
        TriPathNet::new(encoder, mirror, decoder_lab, lambda)
    }

    pub fn encoder(&self) -> &[Layer] {
        &self.encoder
    }

    pub fn decoder_img(&self) -> &[Layer] {
        &self.decoder_img
    }

    pub fn decoder_lab(&self) -> &[Layer] {
        &self.decoder_lab
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        TriPathNet::new(
            self.encoder.clone(),
            self.decoder_img.clone(),
            self.decoder_lab.clone(),
            lambda,
        )
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.last().unwrap().outputs()
    }

    pub fn num_classes(&self) -> usize {
        self.decoder_lab.last().unwrap().outputs()
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            encoder: shapes(&self.encoder),
            decoder_img: shapes(&self.decoder_img),
            decoder_lab: shapes(&self.decoder_lab),
            lambda: self.lambda,
        }
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape {
                op: "encode",
                left: x.shape(),
                right: self.encoder[0].w.shape(),
            });
        }
        Ok(())
    }

    fn check_code(&self, h: &Matrix) -> Result<()> {
        if h.cols() != self.hidden_dim() {
            return Err(Error::Shape {
                op: "decode",
                left: h.shape(),
                right: (1, self.hidden_dim()),
            });
        }
        Ok(())
    }

    fn check_data(&self, data: &TripletDataset) -> Result<()> {
        self.check_input(data.noisy())?;
        if data.num_classes() != self.num_classes() {
            return Err(Error::contract(format!(
                "data has {} classes, the network {}",
                data.num_classes(),
                self.num_classes()
            )));
        }
        Ok(())
    }

    /// Shared code `h` for a batch of (noisy) images.
    pub fn encode(&self, noisy: &Matrix) -> Result<Matrix> {
        self.check_input(noisy)?;
        run_stack(&self.encoder, noisy)
    }

    pub fn decode_image(&self, h: &Matrix) -> Result<Matrix> {
        self.check_code(h)?;
        run_stack(&self.decoder_img, h)
    }

    /// Independent per-class sigmoid scores.
    pub fn decode_label(&self, h: &Matrix) -> Result<Matrix> {
        self.check_code(h)?;
        run_stack(&self.decoder_lab, h)
    }

    /// Encodes once and decodes both heads from the same code.
    pub fn predict(&self, noisy: &Matrix) -> Result<Prediction> {
        let h = self.encode(noisy)?;
        let images = self.decode_image(&h)?;
        let scores = self.decode_label(&h)?;
        let classes = scores.argmax_rows();
        Ok(Prediction {
            images,
            scores,
            classes,
        })
    }

    /// The summed cross-entropy objective with its per-term breakdown.
    pub fn joint_loss(&self, data: &TripletDataset) -> Result<LossTerms> {
        Model::loss(self, data)
    }

    /// Exact gradient of [`joint_loss`](Self::joint_loss).
    pub fn backward(&self, data: &TripletDataset) -> Result<ParamVector> {
        self.check_data(data)?;
        Ok(self.backward_weighted(data, 1.0, self.lambda)?.1)
    }

    /// Gradient of `image_weight · image + label_weight · label`.
    ///
    /// `backward` is the case `(1, λ)`; `(0, λ)` isolates the label term.
    pub fn backward_weighted(
        &self,
        data: &TripletDataset,
        image_weight: f64,
        label_weight: f64,
    ) -> Result<(LossTerms, ParamVector)> {
        self.check_data(data)?;
        let shards = exec::shards(data.len());
        let parts = Serial.run(shards.len(), &|i| {
            self.backprop(&data.slice(shards[i].clone()), image_weight, label_weight)
        });
        let (terms, grad) = exec::reduce(parts, self.num_params())?;
        Ok((terms, ParamVector(grad)))
    }

    fn backprop(&self, data: &TripletDataset, image_weight: f64, label_weight: f64) -> Result<(LossTerms, Vec<f64>)> {
        let enc_acts = forward_stack(&self.encoder, data.noisy())?;
        let h = enc_acts.last().unwrap();
        let img_acts = forward_stack(&self.decoder_img, h)?;
        let lab_acts = forward_stack(&self.decoder_lab, h)?;
        let v_hat = img_acts.last().unwrap();
        let y_hat = lab_acts.last().unwrap();
        let terms = self.terms(data, v_hat, y_hat)?;

        let n_enc = stack_params(&self.encoder);
        let n_img = stack_params(&self.decoder_img);
        let mut grad = vec![0.0; self.num_params()];
        let (g_enc, rest) = grad.split_at_mut(n_enc);
        let (g_img, g_lab) = rest.split_at_mut(n_img);

        // Sigmoid output with cross-entropy: the pre-activation gradient is
        // simply prediction minus target.
        let delta_img = v_hat.sub(data.clean())?.scale(image_weight);
        let delta_lab = y_hat.sub(data.labels_onehot())?.scale(label_weight);
        let dh_img =
            backward_stack(&self.decoder_img, h, &img_acts, delta_img, g_img, true)?.expect("input gradient requested");
        let dh_lab =
            backward_stack(&self.decoder_lab, h, &lab_acts, delta_lab, g_lab, true)?.expect("input gradient requested");
        // The shared code receives the sum of both decoders' gradients.
        let delta_h = sigmoid_delta(dh_img.add(&dh_lab)?, h);
        backward_stack(&self.encoder, data.noisy(), &enc_acts, delta_h, g_enc, false)?;

        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::non_finite("gradient of the joint loss"));
        }
        Ok((terms, grad))
    }

    fn terms(&self, data: &TripletDataset, v_hat: &Matrix, y_hat: &Matrix) -> Result<LossTerms> {
        let image = bernoulli_cross_entropy(data.clean(), v_hat);
        let label = bernoulli_cross_entropy(data.labels_onehot(), y_hat);
        let terms = LossTerms {
            total: image + self.lambda * label,
            image,
            label,
        };
        if !terms.is_finite() {
            return Err(Error::non_finite("joint loss"));
        }
        Ok(terms)
    }
}

impl Model for TriPathNet {
    fn num_params(&self) -> usize {
        stack_params(&self.encoder) + stack_params(&self.decoder_img) + stack_params(&self.decoder_lab)
    }

    fn flatten(&self) -> ParamVector {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in self.encoder.iter().chain(&self.decoder_img).chain(&self.decoder_lab) {
            layer.write_params(&mut out);
        }
        ParamVector(out)
    }

    fn with_params(&self, params: &[f64]) -> Result<Self> {
        self.shape().unflatten(params)
    }

    fn loss(&self, data: &TripletDataset) -> Result<LossTerms> {
        self.check_data(data)?;
        let mut total = LossTerms::default();
        for range in exec::shards(data.len()) {
            let part = data.slice(range);
            let p = self.predict(part.noisy())?;
            total = total + self.terms(&part, &p.images, &p.scores)?;
        }
        Ok(total)
    }

    fn loss_and_gradient(&self, data: &TripletDataset, exec: &dyn Executor) -> Result<(LossTerms, ParamVector)> {
        self.check_data(data)?;
        let shards = exec::shards(data.len());
        let parts = exec.run(shards.len(), &|i| {
            self.backprop(&data.slice(shards[i].clone()), 1.0, self.lambda)
        });
        let (terms, grad) = exec::reduce(parts, self.num_params())?;
        Ok((terms, ParamVector(grad)))
    }
}

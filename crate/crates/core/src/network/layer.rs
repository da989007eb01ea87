use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// One sigmoid layer: `out = σ(x · w + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// inputs x outputs.
    pub w: Matrix,
    /// 1 x outputs.
    pub b: Matrix,
}

impl Layer {
    pub fn new(w: Matrix, b: Matrix) -> Result<Self> {
        if b.shape() != (1, w.cols()) {
            return Err(Error::Shape {
                op: "layer bias",
                left: w.shape(),
                right: b.shape(),
            });
        }
        Ok(Layer { w, b })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            w: Matrix::zeros(inputs, outputs),
            b: Matrix::zeros(1, outputs),
        }
    }

    /// Weights uniform in (-range, range), zero bias.
    pub fn uniform(inputs: usize, outputs: usize, range: f64, rng: &mut Rng) -> Self {
        Layer {
            w: Matrix::from_fn(inputs, outputs, |_, _| rng.uniform(-range, range)),
            b: Matrix::zeros(1, outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.rows()
    }

    pub fn outputs(&self) -> usize {
        self.w.cols()
    }

    pub fn num_params(&self) -> usize {
        self.w.rows() * self.w.cols() + self.w.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.b.is_finite()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul(&self.w)?;
        z.add_row_in_place(&self.b)?;
        z.sigmoid_in_place();
        Ok(z)
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.as_slice());
        out.extend_from_slice(self.b.as_slice());
    }

    pub(crate) fn read_params(inputs: usize, outputs: usize, params: &[f64]) -> Result<Layer> {
        let nw = inputs * outputs;
        Layer::new(
            Matrix::new(inputs, outputs, params[..nw].to_vec())?,
            Matrix::new(1, outputs, params[nw..nw + outputs].to_vec())?,
        )
    }
}

pub(crate) fn stack_params(layers: &[Layer]) -> usize {
    layers.iter().map(Layer::num_params).sum()
}

/// Output of every layer, in order.
pub(crate) fn forward_stack(layers: &[Layer], input: &Matrix) -> Result<Vec<Matrix>> {
    let mut acts: Vec<Matrix> = Vec::with_capacity(layers.len());
    for layer in layers {
        let next = layer.forward(acts.last().unwrap_or(input))?;
        acts.push(next);
    }
    Ok(acts)
}

/// Final output of a stack without keeping intermediates.
pub(crate) fn run_stack(layers: &[Layer], input: &Matrix) -> Result<Matrix> {
    let mut x = input.clone();
    for layer in layers {
        x = layer.forward(&x)?;
    }
    Ok(x)
}

/// Backpropagates through a stack.
///
/// `delta` is the loss gradient with respect to the pre-activation of the
/// last layer. Parameter gradients are accumulated into `grads`, laid out
/// like the stack's flat parameters. Returns the gradient with respect to
/// `input` when `want_input_grad` is set.
pub(crate) fn backward_stack(
    layers: &[Layer],
    input: &Matrix,
    acts: &[Matrix],
    mut delta: Matrix,
    grads: &mut [f64],
    want_input_grad: bool,
) -> Result<Option<Matrix>> {
    let mut offsets = Vec::with_capacity(layers.len());
    let mut offset = 0;
    for layer in layers {
        offsets.push(offset);
        offset += layer.num_params();
    }
    debug_assert_eq!(offset, grads.len());

    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let a_in = if l == 0 { input } else { &acts[l - 1] };
        let dw = a_in.matmul_tn(&delta)?;
        let db = delta.sum_rows();
        let slot = &mut grads[offsets[l]..offsets[l] + layer.num_params()];
        let (gw, gb) = slot.split_at_mut(dw.as_slice().len());
        for (g, v) in gw.iter_mut().zip(dw.as_slice()) {
            *g += v;
        }
        for (g, v) in gb.iter_mut().zip(db.as_slice()) {
            *g += v;
        }
        if l == 0 && !want_input_grad {
            return Ok(None);
        }
        let d_in = delta.matmul_nt(&layer.w)?;
        if l == 0 {
            return Ok(Some(d_in));
        }
        delta = sigmoid_delta(d_in, &acts[l - 1]);
    }
    // Empty stack: the gradient passes through unchanged.
    Ok(want_input_grad.then_some(delta))
}

/// `upstream ⊙ a ⊙ (1 - a)` for a sigmoid output `a`.
pub(crate) fn sigmoid_delta(mut upstream: Matrix, a: &Matrix) -> Matrix {
    for (g, &s) in upstream.as_mut_slice().iter_mut().zip(a.as_slice()) {
        *g *= s * (1.0 - s);
    }
    upstream
}

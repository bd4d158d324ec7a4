//! Forward/backward passes for the layer types the zoo needs: dense (+relu),
//! elementwise product, concatenation, and the residual cross layer
//! x_{l+1} = x0 * (W x_l + b_l) + x_l. Backward passes are hand-derived and
//! accumulate into each tensor's grad buffer.

use rand_chacha::ChaCha8Rng;

use super::{init_dense_weight, ParamTensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    fn apply(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => pre,
            Activation::Relu => pre.max(0.0),
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// act(W x + b). Returns the output and the pre-activations needed by the
/// backward pass.
pub fn dense_forward(
    x: &[f64],
    w: &ParamTensor,
    b: &ParamTensor,
    act: Activation,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (out_dim, in_dim) = (w.rows(), w.cols());
    if x.len() != in_dim || b.len() != out_dim {
        return Err(Error::Shape(format!(
            "dense `{}`: x has {} entries, expected {in_dim}; b has {}, expected {out_dim}",
            w.name,
            x.len(),
            b.len()
        )));
    }
    let mut pre = Vec::with_capacity(out_dim);
    for o in 0..out_dim {
        let row = w.row(o);
        let mut acc = b.values[o];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        pre.push(acc);
    }
    let out = pre.iter().map(|&p| act.apply(p)).collect();
    Ok((out, pre))
}

/// Backward of `dense_forward`; accumulates into w.grad / b.grad and returns
/// the gradient w.r.t. x.
pub fn dense_backward(
    x: &[f64],
    pre: &[f64],
    w: &mut ParamTensor,
    b: &mut ParamTensor,
    act: Activation,
    grad_out: &[f64],
) -> Vec<f64> {
    let (out_dim, in_dim) = (w.rows(), w.cols());
    debug_assert_eq!(x.len(), in_dim);
    debug_assert_eq!(grad_out.len(), out_dim);
    let mut grad_x = vec![0.0; in_dim];
    for o in 0..out_dim {
        let d_pre = grad_out[o] * act.derivative(pre[o]);
        if d_pre == 0.0 {
            continue;
        }
        b.grad[o] += d_pre;
        let w_row = w.row(o);
        for i in 0..in_dim {
            grad_x[i] += d_pre * w_row[i];
        }
        let g_row = w.grad_row_mut(o);
        for i in 0..in_dim {
            g_row[i] += d_pre * x[i];
        }
    }
    grad_x
}

/// Hadamard product a * b.
pub fn elementwise_product(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "elementwise product of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}

/// Backward of the Hadamard product: (grad*b, grad*a).
pub fn elementwise_backward(a: &[f64], b: &[f64], grad_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let grad_a = grad_out.iter().zip(b).map(|(g, y)| g * y).collect();
    let grad_b = grad_out.iter().zip(a).map(|(g, x)| g * x).collect();
    (grad_a, grad_b)
}

/// Concatenate parts in order.
pub fn concat(parts: &[&[f64]]) -> Result<Vec<f64>> {
    if parts.is_empty() {
        return Err(Error::Shape("concat of zero parts".into()));
    }
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for part in parts {
        out.extend_from_slice(part);
    }
    Ok(out)
}

/// Route gradient slices back to the concatenated parts.
pub fn concat_backward(part_lens: &[usize], grad_out: &[f64]) -> Vec<Vec<f64>> {
    let mut grads = Vec::with_capacity(part_lens.len());
    let mut offset = 0;
    for &len in part_lens {
        grads.push(grad_out[offset..offset + len].to_vec());
        offset += len;
    }
    grads
}

/// One cross layer: x0 * (W x + b) + x. Returns the output and the inner
/// affine result u = W x + b for the backward pass.
pub fn cross_forward(
    x0: &[f64],
    w: &ParamTensor,
    b: &ParamTensor,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (u, _) = dense_forward(x, w, b, Activation::Identity)?;
    if x0.len() != u.len() || x.len() != u.len() {
        return Err(Error::Shape(format!(
            "cross layer `{}`: x0/x/u lengths {}/{}/{}",
            w.name,
            x0.len(),
            x.len(),
            u.len()
        )));
    }
    let out = x0
        .iter()
        .zip(&u)
        .zip(x)
        .map(|((x0i, ui), xi)| x0i * ui + xi)
        .collect();
    Ok((out, u))
}

/// Backward of `cross_forward`; returns (grad_x0, grad_x) and accumulates
/// into w.grad / b.grad.
pub fn cross_backward(
    x0: &[f64],
    u: &[f64],
    x: &[f64],
    w: &mut ParamTensor,
    b: &mut ParamTensor,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let dim = x0.len();
    let grad_x0: Vec<f64> = grad_out.iter().zip(u).map(|(g, ui)| g * ui).collect();
    let d_u: Vec<f64> = grad_out.iter().zip(x0).map(|(g, x0i)| g * x0i).collect();
    let mut grad_x = grad_out.to_vec();
    for o in 0..dim {
        if d_u[o] == 0.0 {
            continue;
        }
        b.grad[o] += d_u[o];
        let w_row = w.row(o);
        for i in 0..dim {
            grad_x[i] += d_u[o] * w_row[i];
        }
        let g_row = w.grad_row_mut(o);
        for i in 0..dim {
            g_row[i] += d_u[o] * x[i];
        }
    }
    (grad_x0, grad_x)
}

/// A chain of dense layers with relu on hidden layers and a configurable
/// output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub weights: Vec<ParamTensor>,
    pub biases: Vec<ParamTensor>,
    pub output_act: Activation,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    /// `sizes` is the full width chain (input, hidden..., output).
    pub fn new(
        rng: &mut ChaCha8Rng,
        name_prefix: &str,
        sizes: &[usize],
        output_act: Activation,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Shape(format!(
                "mlp `{name_prefix}` needs at least input and output sizes"
            )));
        }
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for (layer, pair) in sizes.windows(2).enumerate() {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            weights.push(init_dense_weight(
                rng,
                format!("{name_prefix}.w{layer}"),
                out_dim,
                in_dim,
            ));
            biases.push(ParamTensor::zeros(
                format!("{name_prefix}.b{layer}"),
                &[out_dim],
            ));
        }
        Ok(Mlp {
            weights,
            biases,
            output_act,
        })
    }

    fn act_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output_act
        } else {
            Activation::Relu
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut pres = Vec::with_capacity(self.weights.len());
        let mut current = x.to_vec();
        for layer in 0..self.weights.len() {
            let (out, pre) = dense_forward(
                &current,
                &self.weights[layer],
                &self.biases[layer],
                self.act_for(layer),
            )?;
            inputs.push(std::mem::replace(&mut current, out));
            pres.push(pre);
        }
        Ok((current, MlpCache { inputs, pre: pres }))
    }

    /// Accumulate layer gradients and return the gradient w.r.t. the input.
    pub fn backward(&mut self, cache: &MlpCache, grad_out: &[f64]) -> Vec<f64> {
        let mut grad = grad_out.to_vec();
        for layer in (0..self.weights.len()).rev() {
            grad = dense_backward(
                &cache.inputs[layer],
                &cache.pre[layer],
                &mut self.weights[layer],
                &mut self.biases[layer],
                self.act_for(layer),
                &grad,
            );
        }
        grad
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.weights.iter().chain(self.biases.iter()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .collect()
    }
}

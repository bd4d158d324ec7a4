//! Minimal dense numeric kernel: named parameter tensors with gradient
//! buffers, the handful of layers the model zoo needs, Adam, a
//! finite-difference gradient checker, and bit-exact checkpointing.
//! Everything is double precision.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, TensorRecord};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{
    concat, concat_backward, cross_backward, cross_forward, dense_backward, dense_forward,
    elementwise_backward, elementwise_product, Activation, Mlp, MlpCache,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A named dense tensor with a same-shape gradient accumulation buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let len = shape.iter().product();
        ParamTensor {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "tensor values length {} does not match shape {:?}",
                values.len(),
                shape
            )));
        }
        let grad = vec![0.0; values.len()];
        Ok(ParamTensor {
            name: name.into(),
            shape: shape.to_vec(),
            values,
            grad,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rows of a 2-d tensor (or 1 for vectors).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(self.len())
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn grad_row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.grad[r * c..(r + 1) * c]
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn check_finite_values(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                name: self.name.clone(),
                what: "value",
            });
        }
        Ok(())
    }

    pub fn check_finite_grad(&self) -> Result<()> {
        if self.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                name: self.name.clone(),
                what: "gradient",
            });
        }
        Ok(())
    }
}

/// Embedding init: uniform(-0.1/sqrt(dim), 0.1/sqrt(dim)).
pub fn init_embedding(
    rng: &mut ChaCha8Rng,
    name: impl Into<String>,
    rows: usize,
    dim: usize,
) -> ParamTensor {
    let bound = 0.1 / (dim as f64).sqrt();
    let values = (0..rows * dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    ParamTensor::from_values(name, &[rows, dim], values).expect("consistent shape")
}

/// Dense-layer weight init: Kaiming-style N(0, sqrt(2 / fan_in)).
pub fn init_dense_weight(
    rng: &mut ChaCha8Rng,
    name: impl Into<String>,
    out_dim: usize,
    in_dim: usize,
) -> ParamTensor {
    let std = (2.0 / in_dim as f64).sqrt();
    let values = (0..out_dim * in_dim)
        .map(|_| std * StandardNormal.sample::<f64, _>(rng))
        .collect();
    ParamTensor::from_values(name, &[out_dim, in_dim], values).expect("consistent shape")
}

//! Adam with bias correction over a set of named parameter tensors.

use serde::{Deserialize, Serialize};

use super::ParamTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

/// First/second moment buffers aligned with a fixed parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, params: &[&ParamTensor]) -> Self {
        AdamState {
            cfg,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    /// One bias-corrected update. Gradients must be populated; they are
    /// zeroed afterwards. A non-finite gradient aborts naming the parameter.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state tracks {} tensors, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for p in params.iter() {
            p.check_finite_grad()?;
        }
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bias1 = 1.0 - b1.powi(self.t as i32);
        let bias2 = 1.0 - b2.powi(self.t as i32);
        for (idx, p) in params.iter_mut().enumerate() {
            if p.len() != self.m[idx].len() {
                return Err(Error::Shape(format!(
                    "adam state slot {idx} has {} entries, tensor `{}` has {}",
                    self.m[idx].len(),
                    p.name,
                    p.len()
                )));
            }
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for i in 0..p.len() {
                let g = p.grad[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p.values[i] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
            p.check_finite_values()?;
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut p = ParamTensor::from_values("w", &[3], vec![1.0, -2.0, 0.5]).unwrap();
        let mut state = AdamState::new(AdamConfig::with_lr(0.1), &[&p]);
        let before = p.values.clone();
        state.step(&mut [&mut p]).unwrap();
        assert_eq!(p.values, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        let mut p = ParamTensor::from_values("w", &[1], vec![1.0]).unwrap();
        p.grad[0] = 1.0;
        let mut state = AdamState::new(AdamConfig::with_lr(1e-5), &[&p]);
        state.step(&mut [&mut p]).unwrap();
        assert!((p.values[0] - (1.0 - 1e-5)).abs() < 1e-12);
        assert_eq!(p.grad[0], 0.0);
    }

    #[test]
    fn descends_convex_quadratic() {
        // f(w) = w^2 from w = 5; |w| must strictly decrease over 100 steps.
        let mut p = ParamTensor::from_values("w", &[1], vec![5.0]).unwrap();
        let mut state = AdamState::new(AdamConfig::with_lr(0.05), &[&p]);
        let mut last = p.values[0].abs();
        for _ in 0..100 {
            p.grad[0] = 2.0 * p.values[0];
            state.step(&mut [&mut p]).unwrap();
            let now = p.values[0].abs();
            assert!(now < last, "|w| did not decrease: {now} vs {last}");
            last = now;
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = ParamTensor::from_values("emb.user", &[1], vec![1.0]).unwrap();
        p.grad[0] = f64::NAN;
        let mut state = AdamState::new(AdamConfig::default(), &[&p]);
        let err = state.step(&mut [&mut p]).unwrap_err();
        assert!(err.to_string().contains("emb.user"), "{err}");
    }
}

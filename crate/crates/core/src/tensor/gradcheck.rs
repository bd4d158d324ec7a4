//! Central finite-difference gradient checker.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParamTensor;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub coords_checked: usize,
}

/// Compare analytic gradients against central differences.
///
/// `loss_backward` must zero nothing itself: grads are cleared here, then the
/// closure runs once to populate them. `loss_only` is the same loss without
/// gradient accumulation (it runs with perturbed parameters). Tensors longer
/// than `max_coords_per_tensor` are subsampled with the given seed.
pub fn grad_check<M>(
    model: &mut M,
    mut loss_backward: impl FnMut(&mut M) -> f64,
    mut loss_only: impl FnMut(&mut M) -> f64,
    mut params_of: impl FnMut(&mut M) -> Vec<&mut ParamTensor>,
    eps: f64,
    max_coords_per_tensor: usize,
    seed: u64,
) -> GradCheckReport {
    for p in params_of(model) {
        p.zero_grad();
    }
    let _ = loss_backward(model);
    let analytic: Vec<(String, Vec<f64>)> = params_of(model)
        .iter()
        .map(|p| (p.name.clone(), p.grad.clone()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        coords_checked: 0,
    };

    for (ti, (name, grads)) in analytic.iter().enumerate() {
        let len = grads.len();
        let coords: Vec<usize> = if len <= max_coords_per_tensor {
            (0..len).collect()
        } else {
            rand::seq::index::sample(&mut rng, len, max_coords_per_tensor).into_vec()
        };
        for j in coords {
            let original = params_of(model)[ti].values[j];
            params_of(model)[ti].values[j] = original + eps;
            let loss_plus = loss_only(model);
            params_of(model)[ti].values[j] = original - eps;
            let loss_minus = loss_only(model);
            params_of(model)[ti].values[j] = original;

            let numeric = (loss_plus - loss_minus) / (2.0 * eps);
            let rel = (numeric - grads[j]).abs() / (numeric.abs() + grads[j].abs()).max(1e-6);
            report.coords_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = name.clone();
                report.worst_index = j;
            }
        }
    }

    for p in params_of(model) {
        p.zero_grad();
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{dense_backward, dense_forward, Activation, ParamTensor};
    use rand::Rng;

    struct Linear {
        w: ParamTensor,
        b: ParamTensor,
        x: Vec<f64>,
    }

    fn linear_loss(m: &Linear) -> f64 {
        let (y, _) = dense_forward(&m.x, &m.w, &m.b, Activation::Identity).unwrap();
        y.iter().sum()
    }

    fn linear_loss_backward(m: &mut Linear) -> f64 {
        let (y, pre) = dense_forward(&m.x, &m.w, &m.b, Activation::Identity).unwrap();
        let grad = vec![1.0; y.len()];
        let x = m.x.clone();
        dense_backward(&x, &pre, &mut m.w, &mut m.b, Activation::Identity, &grad);
        y.iter().sum()
    }

    fn random_linear(seed: u64) -> Linear {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Linear {
            w: ParamTensor::from_values(
                "w",
                &[3, 4],
                (0..12).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap(),
            b: ParamTensor::from_values(
                "b",
                &[3],
                (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap(),
            x: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn linear_model_checks_to_machine_precision() {
        let mut model = random_linear(1);
        let report = grad_check(
            &mut model,
            linear_loss_backward,
            |m| linear_loss(m),
            |m| vec![&mut m.w, &mut m.b],
            1e-5,
            64,
            0,
        );
        assert!(report.max_rel_err < 1e-8, "{report:?}");
    }

    #[test]
    fn corrupted_backward_is_flagged() {
        let mut model = random_linear(2);
        let report = grad_check(
            &mut model,
            |m| {
                let loss = linear_loss_backward(m);
                for g in &mut m.w.grad {
                    *g *= 2.0; // deliberately wrong
                }
                loss
            },
            |m| linear_loss(m),
            |m| vec![&mut m.w, &mut m.b],
            1e-5,
            64,
            0,
        );
        assert!(report.max_rel_err > 1e-1, "{report:?}");
        assert_eq!(report.worst_param, "w");
    }
}

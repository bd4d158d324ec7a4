//! Cross-network stand-in for the production cross-feature model: an
//! embedding encoder feeding L residual cross layers
//! x_{l+1} = x0 * (W_l x_l + b_l) + x_l, then a scalar spending head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_game_id, check_history, FeatureVector, ModelConfig};
use crate::error::Result;
use crate::tensor::{
    cross_backward, cross_forward, init_dense_weight, init_embedding, Activation, Mlp, MlpCache,
    ParamTensor,
};

/// Apply `layers` cross layers to `x0`. Zero layers is the identity.
pub fn cross_network(
    x0: &[f64],
    weights: &[&ParamTensor],
    biases: &[&ParamTensor],
) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    for (w, b) in weights.iter().zip(biases) {
        let (next, _) = cross_forward(x0, w, b, &x)?;
        x = next;
    }
    Ok(x)
}

/// The stack of cross layers with its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CrossStack {
    pub weights: Vec<ParamTensor>,
    pub biases: Vec<ParamTensor>,
}

#[derive(Debug, Clone)]
pub(crate) struct CrossStackCache {
    /// xs[l] is the input to layer l; xs[0] is x0 itself.
    xs: Vec<Vec<f64>>,
    us: Vec<Vec<f64>>,
}

impl CrossStack {
    pub fn new(rng: &mut ChaCha8Rng, name_prefix: &str, dim: usize, layers: usize) -> Self {
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            weights.push(init_dense_weight(
                rng,
                format!("{name_prefix}.cross_w{l}"),
                dim,
                dim,
            ));
            biases.push(ParamTensor::zeros(
                format!("{name_prefix}.cross_b{l}"),
                &[dim],
            ));
        }
        CrossStack { weights, biases }
    }

    pub fn forward(&self, x0: &[f64]) -> Result<(Vec<f64>, CrossStackCache)> {
        let mut xs = vec![x0.to_vec()];
        let mut us = Vec::with_capacity(self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let (next, u) = cross_forward(x0, w, b, xs.last().expect("nonempty"))?;
            xs.push(next);
            us.push(u);
        }
        let out = xs.last().expect("nonempty").clone();
        Ok((out, CrossStackCache { xs, us }))
    }

    /// Returns the gradient w.r.t. x0 (both the multiplicative and the
    /// residual chain paths).
    pub fn backward(&mut self, cache: &CrossStackCache, grad_out: &[f64]) -> Vec<f64> {
        let x0 = cache.xs[0].clone();
        let mut grad = grad_out.to_vec();
        let mut grad_x0 = vec![0.0; x0.len()];
        for l in (0..self.weights.len()).rev() {
            let (g0, gx) = cross_backward(
                &x0,
                &cache.us[l],
                &cache.xs[l],
                &mut self.weights[l],
                &mut self.biases[l],
                &grad,
            );
            for (acc, g) in grad_x0.iter_mut().zip(&g0) {
                *acc += g;
            }
            grad = gx;
        }
        for (acc, g) in grad_x0.iter_mut().zip(&grad) {
            *acc += g;
        }
        grad_x0
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

/// x0 = [game embedding, mean history embedding, dense side features].
pub(crate) fn build_x0(
    game_emb: &ParamTensor,
    hist_emb: &ParamTensor,
    f: &FeatureVector,
    k: usize,
) -> Vec<f64> {
    let mut x0 = Vec::with_capacity(2 * k + 3);
    x0.extend_from_slice(game_emb.row(f.game_id as usize));
    let mut pooled = vec![0.0; k];
    if !f.history.is_empty() {
        let inv = 1.0 / f.history.len() as f64;
        for &h in &f.history {
            for (p, v) in pooled.iter_mut().zip(hist_emb.row(h as usize)) {
                *p += v * inv;
            }
        }
    }
    x0.extend_from_slice(&pooled);
    x0.extend_from_slice(&f.dense);
    x0
}

/// Scatter the x0 gradient back to the embedding tables (dense side features
/// are inputs, not parameters).
pub(crate) fn backprop_x0(
    game_emb: &mut ParamTensor,
    hist_emb: &mut ParamTensor,
    f: &FeatureVector,
    k: usize,
    grad_x0: &[f64],
) {
    for (g, v) in game_emb
        .grad_row_mut(f.game_id as usize)
        .iter_mut()
        .zip(&grad_x0[..k])
    {
        *g += v;
    }
    if !f.history.is_empty() {
        let inv = 1.0 / f.history.len() as f64;
        for &h in &f.history {
            for (g, v) in hist_emb
                .grad_row_mut(h as usize)
                .iter_mut()
                .zip(&grad_x0[k..2 * k])
            {
                *g += v * inv;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossNetModel {
    pub cfg: ModelConfig,
    game_emb: ParamTensor,
    hist_emb: ParamTensor,
    stack: CrossStack,
    head: Mlp,
}

#[derive(Debug, Clone)]
pub struct CrossNetCache {
    stack: CrossStackCache,
    head: MlpCache,
}

impl CrossNetModel {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let k = cfg.embed_dim;
        let d0 = cfg.cross_input_dim();
        let game_emb = init_embedding(&mut rng, "crossnet.game_emb", cfg.n_paid_games as usize, k);
        let hist_emb = init_embedding(
            &mut rng,
            "crossnet.hist_emb",
            cfg.n_download_games as usize,
            k,
        );
        let stack = CrossStack::new(&mut rng, "crossnet", d0, cfg.cross_layers);
        let mut head_sizes = vec![d0];
        head_sizes.extend_from_slice(&cfg.head_mlp_sizes);
        let head = Mlp::new(&mut rng, "crossnet.head", &head_sizes, Activation::Identity)?;
        Ok(CrossNetModel {
            cfg: cfg.clone(),
            game_emb,
            hist_emb,
            stack,
            head,
        })
    }

    fn check(&self, f: &FeatureVector) -> Result<()> {
        check_game_id(f.game_id, self.cfg.n_paid_games)?;
        check_history(&f.history, self.cfg.n_download_games, self.cfg.history_len)
    }

    /// The cross-feature representation v_fi before the head.
    pub fn representation(&self, f: &FeatureVector) -> Result<Vec<f64>> {
        self.check(f)?;
        let x0 = build_x0(&self.game_emb, &self.hist_emb, f, self.cfg.embed_dim);
        let (out, _) = self.stack.forward(&x0)?;
        Ok(out)
    }

    pub fn forward(&self, f: &FeatureVector) -> Result<(f64, CrossNetCache)> {
        self.check(f)?;
        let x0 = build_x0(&self.game_emb, &self.hist_emb, f, self.cfg.embed_dim);
        let (v_fi, stack) = self.stack.forward(&x0)?;
        let (out, head) = self.head.forward(&v_fi)?;
        Ok((out[0], CrossNetCache { stack, head }))
    }

    pub fn backward(&mut self, f: &FeatureVector, cache: &CrossNetCache, upstream: f64) -> Result<()> {
        let grad_vfi = self.head.backward(&cache.head, &[upstream]);
        let grad_x0 = self.stack.backward(&cache.stack, &grad_vfi);
        backprop_x0(
            &mut self.game_emb,
            &mut self.hist_emb,
            f,
            self.cfg.embed_dim,
            &grad_x0,
        );
        Ok(())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut params = vec![&self.game_emb, &self.hist_emb];
        params.extend(self.stack.params());
        params.extend(self.head.params());
        params
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut params = vec![&mut self.game_emb, &mut self.hist_emb];
        params.extend(self.stack.params_mut());
        params.extend(self.head.params_mut());
        params
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            kind: ModelKind::CrossNet,
            n_users: 3,
            n_paid_games: 5,
            n_download_games: 8,
            embed_dim: 4,
            history_len: 10,
            pref_mlp_sizes: vec![4],
            cross_layers: 2,
            head_mlp_sizes: vec![6, 1],
            seed: 11,
        }
    }

    fn features() -> FeatureVector {
        FeatureVector {
            user_id: None,
            game_id: 2,
            history: vec![1, 7, 3],
            dense: [0.4, 0.2, 0.3],
        }
    }

    #[test]
    fn zero_weight_layers_are_identity_on_x0() {
        let dim = 5;
        let w = ParamTensor::zeros("w", &[dim, dim]);
        let b = ParamTensor::zeros("b", &[dim]);
        let x0 = vec![0.5, -1.0, 2.0, 0.0, 3.0];
        let out = cross_network(&x0, &[&w, &w], &[&b, &b]).unwrap();
        assert_eq!(out, x0);
    }

    #[test]
    fn zero_layers_is_identity() {
        let x0 = vec![1.0, 2.0];
        let out = cross_network(&x0, &[], &[]).unwrap();
        assert_eq!(out, x0);
    }

    #[test]
    fn representation_has_x0_width() {
        let cfg = tiny_cfg();
        let model = CrossNetModel::new(&cfg).unwrap();
        let v_fi = model.representation(&features()).unwrap();
        assert_eq!(v_fi.len(), cfg.cross_input_dim());
    }

    #[test]
    fn forward_is_pure() {
        let model = CrossNetModel::new(&tiny_cfg()).unwrap();
        let f = features();
        let (a, _) = model.forward(&f).unwrap();
        let (b, _) = model.forward(&f).unwrap();
        assert_eq!(a, b);
    }
}

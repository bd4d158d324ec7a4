//! Factorization machine over the sparse feature space
//! [user ids | paid-game ids | download ids | dense side features], with the
//! usual O(n k) second-order form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_game_id, check_history, require_user_index, FeatureVector, ModelConfig, ModelKind};
use crate::error::Result;
use crate::tensor::{init_embedding, ParamTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct FmModel {
    pub cfg: ModelConfig,
    bias: ParamTensor,
    linear: ParamTensor,
    factors: ParamTensor,
}

#[derive(Debug, Clone)]
pub struct FmCache {
    active: Vec<(usize, f64)>,
    /// Per-factor sums S_f = sum_i v_if x_i.
    factor_sums: Vec<f64>,
}

impl FmModel {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let dim = Self::feature_dim(cfg);
        Ok(FmModel {
            cfg: cfg.clone(),
            bias: ParamTensor::zeros("fm.bias", &[1]),
            linear: ParamTensor::zeros("fm.linear", &[dim]),
            factors: init_embedding(&mut rng, "fm.factors", dim, cfg.embed_dim),
        })
    }

    fn feature_dim(cfg: &ModelConfig) -> usize {
        cfg.n_users as usize + cfg.n_paid_games as usize + cfg.n_download_games as usize + 3
    }

    /// Sparse active features with merged duplicate indices.
    fn active_features(&self, f: &FeatureVector) -> Result<Vec<(usize, f64)>> {
        let user = require_user_index(f, self.cfg.n_users, ModelKind::Fm)?;
        check_game_id(f.game_id, self.cfg.n_paid_games)?;
        check_history(&f.history, self.cfg.n_download_games, self.cfg.history_len)?;
        let game_offset = self.cfg.n_users as usize;
        let hist_offset = game_offset + self.cfg.n_paid_games as usize;
        let dense_offset = hist_offset + self.cfg.n_download_games as usize;

        let mut active = Vec::with_capacity(2 + f.history.len() + 3);
        active.push((user, 1.0));
        active.push((game_offset + f.game_id as usize, 1.0));
        for &h in &f.history {
            active.push((hist_offset + h as usize, 1.0));
        }
        for (i, &value) in f.dense.iter().enumerate() {
            if value != 0.0 {
                active.push((dense_offset + i, value));
            }
        }
        active.sort_unstable_by_key(|&(idx, _)| idx);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(active.len());
        for (idx, value) in active {
            match merged.last_mut() {
                Some((last, acc)) if *last == idx => *acc += value,
                _ => merged.push((idx, value)),
            }
        }
        Ok(merged)
    }

    pub fn forward(&self, f: &FeatureVector) -> Result<(f64, FmCache)> {
        let active = self.active_features(f)?;
        let k = self.cfg.embed_dim;
        let mut score = self.bias.values[0];
        for &(idx, x) in &active {
            score += self.linear.values[idx] * x;
        }
        let mut factor_sums = vec![0.0; k];
        let mut square_sum = 0.0;
        for &(idx, x) in &active {
            let row = self.factors.row(idx);
            for (s, v) in factor_sums.iter_mut().zip(row) {
                *s += v * x;
            }
            for v in row {
                square_sum += v * v * x * x;
            }
        }
        let pair_term: f64 = factor_sums.iter().map(|s| s * s).sum::<f64>() - square_sum;
        score += 0.5 * pair_term;
        Ok((
            score,
            FmCache {
                active,
                factor_sums,
            },
        ))
    }

    pub fn backward(&mut self, _f: &FeatureVector, cache: &FmCache, upstream: f64) -> Result<()> {
        self.bias.grad[0] += upstream;
        for &(idx, x) in &cache.active {
            self.linear.grad[idx] += upstream * x;
        }
        let k = self.cfg.embed_dim;
        for &(idx, x) in &cache.active {
            let row_start = idx * k;
            for fct in 0..k {
                let v = self.factors.values[row_start + fct];
                self.factors.grad[row_start + fct] +=
                    upstream * x * (cache.factor_sums[fct] - v * x);
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.bias, &self.linear, &self.factors]
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.bias, &mut self.linear, &mut self.factors]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            kind: ModelKind::Fm,
            n_users: 5,
            n_paid_games: 4,
            n_download_games: 7,
            embed_dim: 3,
            history_len: 10,
            pref_mlp_sizes: vec![3],
            cross_layers: 1,
            head_mlp_sizes: vec![4, 1],
            seed: 3,
        }
    }

    fn features() -> FeatureVector {
        FeatureVector {
            user_id: Some(2),
            game_id: 1,
            history: vec![0, 4, 6],
            dense: [1.5, 0.7, 0.3],
        }
    }

    #[test]
    fn zero_factors_reduce_to_linear_model() {
        let mut model = FmModel::new(&tiny_cfg()).unwrap();
        model.factors.values.fill(0.0);
        model.bias.values[0] = 0.25;
        for (i, w) in model.linear.values.iter_mut().enumerate() {
            *w = i as f64 * 0.01;
        }
        let f = features();
        let (score, _) = model.forward(&f).unwrap();
        let game_offset = 5;
        let hist_offset = game_offset + 4;
        let dense_offset = hist_offset + 7;
        let expected = 0.25
            + model.linear.values[2]
            + model.linear.values[game_offset + 1]
            + model.linear.values[hist_offset]
            + model.linear.values[hist_offset + 4]
            + model.linear.values[hist_offset + 6]
            + model.linear.values[dense_offset] * 1.5
            + model.linear.values[dense_offset + 1] * 0.7
            + model.linear.values[dense_offset + 2] * 0.3;
        assert!((score - expected).abs() < 1e-12);
    }

    #[test]
    fn single_active_feature_has_no_pair_term() {
        let cfg = tiny_cfg();
        let model = FmModel::new(&cfg).unwrap();
        // one active feature: pair term must vanish regardless of factors
        let active = vec![(3usize, 2.0f64)];
        let k = cfg.embed_dim;
        let mut sums = vec![0.0; k];
        let mut sq = 0.0;
        for &(idx, x) in &active {
            for (s, v) in sums.iter_mut().zip(model.factors.row(idx)) {
                *s += v * x;
            }
            for v in model.factors.row(idx) {
                sq += v * v * x * x;
            }
        }
        let pair: f64 = sums.iter().map(|s| s * s).sum::<f64>() - sq;
        assert!(pair.abs() < 1e-12);
    }

    #[test]
    fn matches_pairwise_oracle_on_six_features() {
        let model = FmModel::new(&tiny_cfg()).unwrap();
        let f = features(); // user + game + 3 history + 3 dense merged to >= 6 active
        let (score, cache) = model.forward(&f).unwrap();

        // brute force: w0 + sum w_i x_i + sum_{i<j} <v_i, v_j> x_i x_j
        let mut expected = model.bias.values[0];
        for &(idx, x) in &cache.active {
            expected += model.linear.values[idx] * x;
        }
        for i in 0..cache.active.len() {
            for j in (i + 1)..cache.active.len() {
                let (ai, xi) = cache.active[i];
                let (aj, xj) = cache.active[j];
                let dot: f64 = model
                    .factors
                    .row(ai)
                    .iter()
                    .zip(model.factors.row(aj))
                    .map(|(a, b)| a * b)
                    .sum();
                expected += dot * xi * xj;
            }
        }
        assert!(cache.active.len() >= 6);
        assert!(
            (score - expected).abs() < 1e-10,
            "fast {score} vs oracle {expected}"
        );
    }

    #[test]
    fn duplicate_history_ids_merge() {
        let model = FmModel::new(&tiny_cfg()).unwrap();
        let mut f = features();
        f.history = vec![4, 4];
        let active = model.active_features(&f).unwrap();
        let hist_offset = 5 + 4;
        let slot = active.iter().find(|(i, _)| *i == hist_offset + 4).unwrap();
        assert_eq!(slot.1, 2.0);
    }

    #[test]
    fn random_inputs_stay_finite() {
        let model = FmModel::new(&tiny_cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let f = FeatureVector {
                user_id: Some(rng.random_range(0..5)),
                game_id: rng.random_range(0..4),
                history: (0..rng.random_range(1..=3)).map(|_| rng.random_range(0..7)).collect(),
                dense: [rng.random(), rng.random(), rng.random()],
            };
            let (score, _) = model.forward(&f).unwrap();
            assert!(score.is_finite());
        }
    }
}

//! Matrix factorization baseline: global bias + user bias + game bias +
//! inner product of user/game embeddings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_game_id, require_user_index, FeatureVector, ModelConfig, ModelKind};
use crate::error::Result;
use crate::tensor::{init_embedding, ParamTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct MfModel {
    pub cfg: ModelConfig,
    global_bias: ParamTensor,
    user_bias: ParamTensor,
    game_bias: ParamTensor,
    user_emb: ParamTensor,
    game_emb: ParamTensor,
}

#[derive(Debug, Clone)]
pub struct MfCache {
    user: usize,
    game: usize,
}

impl MfModel {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n_users = cfg.n_users as usize;
        let n_games = cfg.n_paid_games as usize;
        let k = cfg.embed_dim;
        Ok(MfModel {
            cfg: cfg.clone(),
            global_bias: ParamTensor::zeros("mf.global_bias", &[1]),
            user_bias: ParamTensor::zeros("mf.user_bias", &[n_users]),
            game_bias: ParamTensor::zeros("mf.game_bias", &[n_games]),
            user_emb: init_embedding(&mut rng, "mf.user_emb", n_users, k),
            game_emb: init_embedding(&mut rng, "mf.game_emb", n_games, k),
        })
    }

    pub fn forward(&self, f: &FeatureVector) -> Result<(f64, MfCache)> {
        let user = require_user_index(f, self.cfg.n_users, ModelKind::Mf)?;
        check_game_id(f.game_id, self.cfg.n_paid_games)?;
        let game = f.game_id as usize;
        let dot: f64 = self
            .user_emb
            .row(user)
            .iter()
            .zip(self.game_emb.row(game))
            .map(|(u, g)| u * g)
            .sum();
        let score =
            self.global_bias.values[0] + self.user_bias.values[user] + self.game_bias.values[game] + dot;
        Ok((score, MfCache { user, game }))
    }

    pub fn backward(&mut self, _f: &FeatureVector, cache: &MfCache, upstream: f64) -> Result<()> {
        let (user, game) = (cache.user, cache.game);
        self.global_bias.grad[0] += upstream;
        self.user_bias.grad[user] += upstream;
        self.game_bias.grad[game] += upstream;
        let user_row = self.user_emb.row(user).to_vec();
        let game_row = self.game_emb.row(game).to_vec();
        for (g, gv) in self.user_emb.grad_row_mut(user).iter_mut().zip(&game_row) {
            *g += upstream * gv;
        }
        for (g, uv) in self.game_emb.grad_row_mut(game).iter_mut().zip(&user_row) {
            *g += upstream * uv;
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        vec![
            &self.global_bias,
            &self.user_bias,
            &self.game_bias,
            &self.user_emb,
            &self.game_emb,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![
            &mut self.global_bias,
            &mut self.user_bias,
            &mut self.game_bias,
            &mut self.user_emb,
            &mut self.game_emb,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            kind: ModelKind::Mf,
            n_users: 4,
            n_paid_games: 6,
            n_download_games: 9,
            embed_dim: 3,
            history_len: 10,
            pref_mlp_sizes: vec![3],
            cross_layers: 1,
            head_mlp_sizes: vec![4, 1],
            seed: 1,
        }
    }

    fn features(user: u64, game: u32) -> FeatureVector {
        FeatureVector {
            user_id: Some(user),
            game_id: game,
            history: vec![0],
            dense: [0.0, 0.0, 0.1],
        }
    }

    #[test]
    fn cold_score_is_global_bias() {
        let mut model = MfModel::new(&tiny_cfg()).unwrap();
        for p in model.params_mut() {
            p.values.fill(0.0);
        }
        model.global_bias.values[0] = 0.75;
        let (score, _) = model.forward(&features(1, 2)).unwrap();
        assert_eq!(score, 0.75);
    }

    #[test]
    fn unit_basis_dot_product() {
        let mut model = MfModel::new(&tiny_cfg()).unwrap();
        for p in model.params_mut() {
            p.values.fill(0.0);
        }
        model.global_bias.values[0] = 0.5;
        // e_u = e_p = first basis vector
        model.user_emb.values[0] = 1.0;
        model.game_emb.values[0] = 1.0;
        let (score, _) = model.forward(&features(0, 0)).unwrap();
        assert!((score - 1.5).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_ids_rejected() {
        let model = MfModel::new(&tiny_cfg()).unwrap();
        assert!(model.forward(&features(99, 0)).is_err());
        assert!(model.forward(&features(0, 99)).is_err());
    }
}

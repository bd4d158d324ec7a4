//! The collaborative-enhanced model. User preference comes from an MLP over
//! the concatenated (padded) history embeddings, never from a user id. The
//! collaborative signal v_u * v_p is concatenated with the cross-network
//! representation and fed to the spending head. The game and history
//! embedding tables are shared between both branches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::crossnet::{backprop_x0, build_x0, CrossStack, CrossStackCache};
use super::{check_game_id, check_history, FeatureVector, ModelConfig};
use crate::error::Result;
use crate::tensor::{
    concat, concat_backward, elementwise_backward, elementwise_product, init_embedding,
    Activation, Mlp, MlpCache, ParamTensor,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CollabModel {
    pub cfg: ModelConfig,
    game_emb: ParamTensor,
    hist_emb: ParamTensor,
    pref: Mlp,
    stack: CrossStack,
    head: Mlp,
}

#[derive(Debug, Clone)]
pub struct CollabCache {
    slots: Vec<f64>,
    pref: MlpCache,
    v_u: Vec<f64>,
    v_p: Vec<f64>,
    stack: CrossStackCache,
    head: MlpCache,
}

impl CollabModel {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let k = cfg.embed_dim;
        let d0 = cfg.cross_input_dim();
        let game_emb = init_embedding(&mut rng, "collab.game_emb", cfg.n_paid_games as usize, k);
        let hist_emb = init_embedding(
            &mut rng,
            "collab.hist_emb",
            cfg.n_download_games as usize,
            k,
        );
        let mut pref_sizes = vec![cfg.history_len * k];
        pref_sizes.extend_from_slice(&cfg.pref_mlp_sizes);
        let pref = Mlp::new(&mut rng, "collab.pref", &pref_sizes, Activation::Identity)?;
        let stack = CrossStack::new(&mut rng, "collab", d0, cfg.cross_layers);
        let mut head_sizes = vec![k + d0];
        head_sizes.extend_from_slice(&cfg.head_mlp_sizes);
        let head = Mlp::new(&mut rng, "collab.head", &head_sizes, Activation::Identity)?;
        Ok(CollabModel {
            cfg: cfg.clone(),
            game_emb,
            hist_emb,
            pref,
            stack,
            head,
        })
    }

    /// Concatenated history-embedding slots, right-padded with frozen zeros.
    fn history_slots(&self, history: &[u32]) -> Vec<f64> {
        let k = self.cfg.embed_dim;
        let mut slots = vec![0.0; self.cfg.history_len * k];
        for (i, &h) in history.iter().enumerate() {
            slots[i * k..(i + 1) * k].copy_from_slice(self.hist_emb.row(h as usize));
        }
        slots
    }

    /// The user preference representation v_u from a (possibly empty)
    /// download history.
    pub fn user_pref(&self, history: &[u32]) -> Result<Vec<f64>> {
        check_history(history, self.cfg.n_download_games, self.cfg.history_len)?;
        let slots = self.history_slots(history);
        let (v_u, _) = self.pref.forward(&slots)?;
        Ok(v_u)
    }

    pub fn forward(&self, f: &FeatureVector) -> Result<(f64, CollabCache)> {
        check_game_id(f.game_id, self.cfg.n_paid_games)?;
        check_history(&f.history, self.cfg.n_download_games, self.cfg.history_len)?;
        let k = self.cfg.embed_dim;

        let slots = self.history_slots(&f.history);
        let (v_u, pref_cache) = self.pref.forward(&slots)?;
        let v_p = self.game_emb.row(f.game_id as usize).to_vec();
        let v_up = elementwise_product(&v_u, &v_p)?;

        let x0 = build_x0(&self.game_emb, &self.hist_emb, f, k);
        let (v_fi, stack_cache) = self.stack.forward(&x0)?;

        let v_concat = concat(&[&v_up, &v_fi])?;
        let (out, head_cache) = self.head.forward(&v_concat)?;

        Ok((
            out[0],
            CollabCache {
                slots,
                pref: pref_cache,
                v_u,
                v_p,
                stack: stack_cache,
                head: head_cache,
            },
        ))
    }

    pub fn backward(&mut self, f: &FeatureVector, cache: &CollabCache, upstream: f64) -> Result<()> {
        let k = self.cfg.embed_dim;
        let d0 = self.cfg.cross_input_dim();

        let grad_concat = self.head.backward(&cache.head, &[upstream]);
        let parts = concat_backward(&[k, d0], &grad_concat);
        let (grad_vup, grad_vfi) = (&parts[0], &parts[1]);

        // collaborative branch
        let (grad_vu, grad_vp) = elementwise_backward(&cache.v_u, &cache.v_p, grad_vup);
        for (g, v) in self
            .game_emb
            .grad_row_mut(f.game_id as usize)
            .iter_mut()
            .zip(&grad_vp)
        {
            *g += v;
        }
        let grad_slots = self.pref.backward(&cache.pref, &grad_vu);
        debug_assert_eq!(grad_slots.len(), cache.slots.len());
        for (i, &h) in f.history.iter().enumerate() {
            for (g, v) in self
                .hist_emb
                .grad_row_mut(h as usize)
                .iter_mut()
                .zip(&grad_slots[i * k..(i + 1) * k])
            {
                *g += v;
            }
        }

        // cross-feature branch
        let grad_x0 = self.stack.backward(&cache.stack, grad_vfi);
        backprop_x0(&mut self.game_emb, &mut self.hist_emb, f, k, &grad_x0);
        Ok(())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut params = vec![&self.game_emb, &self.hist_emb];
        params.extend(self.pref.params());
        params.extend(self.stack.params());
        params.extend(self.head.params());
        params
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut params = vec![&mut self.game_emb, &mut self.hist_emb];
        params.extend(self.pref.params_mut());
        params.extend(self.stack.params_mut());
        params.extend(self.head.params_mut());
        params
    }
}

//! The model zoo: matrix factorization, a factorization machine, a
//! cross-network production stand-in, the collaborative-enhanced model, and a
//! zero-inflated lognormal head. All forward/backward passes are hand-derived
//! over `ParamTensor`s.

mod collab;
mod crossnet;
mod fm;
mod mf;
mod ziln;

pub use collab::CollabModel;
pub use crossnet::{cross_network, CrossNetModel};
pub use fm::FmModel;
pub use mf::MfModel;
pub use ziln::{ziln_loss, ZilnModel, ZilnOutput};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Interaction, UserProfile};
use crate::error::{Error, Result};
use crate::tensor::ParamTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mf,
    Fm,
    CrossNet,
    Collab,
    Ziln,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Mf => "mf",
            ModelKind::Fm => "fm",
            ModelKind::CrossNet => "crossnet",
            ModelKind::Collab => "collab",
            ModelKind::Ziln => "ziln",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" => Ok(ModelKind::Mf),
            "fm" => Ok(ModelKind::Fm),
            "crossnet" => Ok(ModelKind::CrossNet),
            "collab" => Ok(ModelKind::Collab),
            "ziln" => Ok(ModelKind::Ziln),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Input features for one (user, game) pair. The collaborative-enhanced model
/// reads only the history, game id, and dense side features; `user_id` exists
/// for the id-based baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub user_id: Option<u64>,
    pub game_id: u32,
    /// Downloaded-game ids, chronological, length 1..=10.
    pub history: Vec<u32>,
    /// log1p(t180), log1p(f180), history length / 10.
    pub dense: [f64; 3],
}

impl FeatureVector {
    pub fn from_row(it: &Interaction, profile: &UserProfile) -> Self {
        FeatureVector {
            user_id: Some(it.user_id),
            game_id: it.game_id,
            history: profile.download_history.clone(),
            dense: dense_side_features(profile),
        }
    }

    pub fn for_candidate(profile: &UserProfile, game_id: u32) -> Self {
        FeatureVector {
            user_id: Some(profile.user_id),
            game_id,
            history: profile.download_history.clone(),
            dense: dense_side_features(profile),
        }
    }
}

pub fn dense_side_features(profile: &UserProfile) -> [f64; 3] {
    [
        profile.total_spend_180.ln_1p(),
        (profile.payment_count_180 as f64).ln_1p(),
        profile.download_history.len() as f64 / 10.0,
    ]
}

/// Static shape and init configuration shared by all models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_users: u64,
    pub n_paid_games: u32,
    pub n_download_games: u32,
    pub embed_dim: usize,
    pub history_len: usize,
    /// Output widths of the preference MLP applied to the concatenated
    /// history embeddings; the last width must equal `embed_dim`.
    pub pref_mlp_sizes: Vec<usize>,
    pub cross_layers: usize,
    /// Hidden widths plus the scalar output of the spending head.
    pub head_mlp_sizes: Vec<usize>,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, ds: &Dataset, seed: u64) -> Self {
        let n_users = ds.profiles.keys().next_back().map_or(1, |&u| u + 1);
        ModelConfig {
            kind,
            n_users,
            n_paid_games: ds.paid_catalog_size,
            n_download_games: ds.download_catalog_size,
            embed_dim: 8,
            history_len: 10,
            pref_mlp_sizes: vec![8, 16, 32, 8],
            cross_layers: 2,
            head_mlp_sizes: vec![16, 8, 1],
            seed,
        }
    }

    /// Width of the cross-network input: game embedding + pooled history
    /// embedding + dense side features.
    pub fn cross_input_dim(&self) -> usize {
        2 * self.embed_dim + 3
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim < 1 || self.history_len < 1 {
            return Err(Error::Config("embed_dim and history_len must be >= 1".into()));
        }
        if self.n_users < 1 || self.n_paid_games < 1 || self.n_download_games < 1 {
            return Err(Error::Config("catalog sizes must be >= 1".into()));
        }
        match self.pref_mlp_sizes.last() {
            Some(&last) if last == self.embed_dim => {}
            _ => {
                return Err(Error::Config(format!(
                    "preference MLP must end at embed_dim {}, got {:?}",
                    self.embed_dim, self.pref_mlp_sizes
                )))
            }
        }
        if self.head_mlp_sizes.last() != Some(&1) {
            return Err(Error::Config(format!(
                "spending head must end with one output, got {:?}",
                self.head_mlp_sizes
            )));
        }
        Ok(())
    }
}

/// Per-model forward caches for a single row.
#[derive(Debug, Clone)]
pub enum Cache {
    Mf(mf::MfCache),
    Fm(fm::FmCache),
    CrossNet(crossnet::CrossNetCache),
    Collab(collab::CollabCache),
    Ziln(ziln::ZilnCache),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mf(MfModel),
    Fm(FmModel),
    CrossNet(CrossNetModel),
    Collab(CollabModel),
    Ziln(ZilnModel),
}

impl Model {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            ModelKind::Mf => Model::Mf(MfModel::new(cfg)?),
            ModelKind::Fm => Model::Fm(FmModel::new(cfg)?),
            ModelKind::CrossNet => Model::CrossNet(CrossNetModel::new(cfg)?),
            ModelKind::Collab => Model::Collab(CollabModel::new(cfg)?),
            ModelKind::Ziln => Model::Ziln(ZilnModel::new(cfg)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Mf(_) => ModelKind::Mf,
            Model::Fm(_) => ModelKind::Fm,
            Model::CrossNet(_) => ModelKind::CrossNet,
            Model::Collab(_) => ModelKind::Collab,
            Model::Ziln(_) => ModelKind::Ziln,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Model::Mf(m) => &m.cfg,
            Model::Fm(m) => &m.cfg,
            Model::CrossNet(m) => &m.cfg,
            Model::Collab(m) => &m.cfg,
            Model::Ziln(m) => &m.cfg,
        }
    }

    /// Pure scalar prediction. For the ZILN head this is the expected spend
    /// pay_prob * exp(mu + sigma^2 / 2).
    pub fn score(&self, f: &FeatureVector) -> Result<f64> {
        Ok(self.forward(f)?.0)
    }

    pub fn forward(&self, f: &FeatureVector) -> Result<(f64, Cache)> {
        match self {
            Model::Mf(m) => {
                let (s, c) = m.forward(f)?;
                Ok((s, Cache::Mf(c)))
            }
            Model::Fm(m) => {
                let (s, c) = m.forward(f)?;
                Ok((s, Cache::Fm(c)))
            }
            Model::CrossNet(m) => {
                let (s, c) = m.forward(f)?;
                Ok((s, Cache::CrossNet(c)))
            }
            Model::Collab(m) => {
                let (s, c) = m.forward(f)?;
                Ok((s, Cache::Collab(c)))
            }
            Model::Ziln(m) => {
                let (out, c) = m.forward(f)?;
                Ok((out.expected_spend(), Cache::Ziln(c)))
            }
        }
    }

    /// Accumulate gradients for d(loss)/d(score) = `upstream` on one row.
    /// Not applicable to the ZILN head, which trains through `ziln_loss`.
    pub fn backward(&mut self, f: &FeatureVector, cache: &Cache, upstream: f64) -> Result<()> {
        match (self, cache) {
            (Model::Mf(m), Cache::Mf(c)) => m.backward(f, c, upstream),
            (Model::Fm(m), Cache::Fm(c)) => m.backward(f, c, upstream),
            (Model::CrossNet(m), Cache::CrossNet(c)) => m.backward(f, c, upstream),
            (Model::Collab(m), Cache::Collab(c)) => m.backward(f, c, upstream),
            (Model::Ziln(..), _) => Err(Error::Shape(
                "ziln head trains through ziln_loss, not a scalar upstream".into(),
            )),
            _ => Err(Error::Shape("cache does not match model".into())),
        }
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        match self {
            Model::Mf(m) => m.params(),
            Model::Fm(m) => m.params(),
            Model::CrossNet(m) => m.params(),
            Model::Collab(m) => m.params(),
            Model::Ziln(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        match self {
            Model::Mf(m) => m.params_mut(),
            Model::Fm(m) => m.params_mut(),
            Model::CrossNet(m) => m.params_mut(),
            Model::Collab(m) => m.params_mut(),
            Model::Ziln(m) => m.params_mut(),
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

fn check_game_id(game_id: u32, n_paid: u32) -> Result<()> {
    if game_id >= n_paid {
        return Err(Error::Data(format!(
            "game id {game_id} out of range (catalog {n_paid})"
        )));
    }
    Ok(())
}

fn check_history(history: &[u32], n_download: u32, max_len: usize) -> Result<()> {
    if history.len() > max_len {
        return Err(Error::Data(format!(
            "history length {} exceeds {max_len}",
            history.len()
        )));
    }
    if let Some(&bad) = history.iter().find(|&&g| g >= n_download) {
        return Err(Error::Data(format!(
            "history id {bad} out of range (catalog {n_download})"
        )));
    }
    Ok(())
}

fn require_user_index(f: &FeatureVector, n_users: u64, kind: ModelKind) -> Result<usize> {
    let user = f.user_id.ok_or_else(|| {
        Error::Data(format!("{kind} requires a user id and none was provided"))
    })?;
    if user >= n_users {
        return Err(Error::Data(format!(
            "user id {user} out of range (table of {n_users})"
        )));
    }
    Ok(user as usize)
}

//! Domain types, dataset I/O, temporal splitting, and the seeded synthetic
//! generator.

mod generate;
mod io;
mod split;

pub use generate::generate_synthetic;
pub use io::{
    load_dataset, save_dataset, save_interactions_csv, save_interactions_jsonl,
    save_profiles_jsonl, FileFormat,
};
pub use split::{build_game_stats, split_temporal};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum download-history length (two-week window cap).
pub const MAX_HISTORY_LEN: usize = 10;

/// One observed (user, game, day, spend) record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    #[serde(rename = "user")]
    pub user_id: u64,
    #[serde(rename = "game")]
    pub game_id: u32,
    pub day: u32,
    pub spend: f64,
}

/// Per-user behavioral profile: recent download history plus 180-day spend
/// aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    #[serde(rename = "user")]
    pub user_id: u64,
    #[serde(rename = "history")]
    pub download_history: Vec<u32>,
    #[serde(rename = "t180")]
    pub total_spend_180: f64,
    #[serde(rename = "f180")]
    pub payment_count_180: u32,
}

impl UserProfile {
    fn validate(&self, download_catalog_size: u32) -> Result<()> {
        let len = self.download_history.len();
        if len == 0 {
            return Err(Error::Data(format!(
                "user {}: empty download history",
                self.user_id
            )));
        }
        if len > MAX_HISTORY_LEN {
            return Err(Error::Data(format!(
                "user {}: history length > 10 (got {len})",
                self.user_id
            )));
        }
        if let Some(&bad) = self
            .download_history
            .iter()
            .find(|&&g| g >= download_catalog_size)
        {
            return Err(Error::Data(format!(
                "user {}: download id {bad} outside catalog of {download_catalog_size}",
                self.user_id
            )));
        }
        if !self.total_spend_180.is_finite() || self.total_spend_180 < 0.0 {
            return Err(Error::Data(format!(
                "user {}: invalid t180 {}",
                self.user_id, self.total_spend_180
            )));
        }
        if self.payment_count_180 == 0 && self.total_spend_180 != 0.0 {
            return Err(Error::Data(format!(
                "user {}: t180 {} > 0 with f180 = 0",
                self.user_id, self.total_spend_180
            )));
        }
        Ok(())
    }
}

/// Per-game historical spend statistics (population standard deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameSpendStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

/// A full dataset: the interaction multiset plus the profile table and
/// catalog bounds. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub interactions: Vec<Interaction>,
    pub profiles: BTreeMap<u64, UserProfile>,
    pub paid_catalog_size: u32,
    pub download_catalog_size: u32,
    /// Seed that produced this dataset (0 for ingested data).
    pub rng_seed: u64,
}

impl Dataset {
    /// Check every type invariant, reporting the first offending row.
    pub fn validate(&self) -> Result<()> {
        for (row, it) in self.interactions.iter().enumerate() {
            if !it.spend.is_finite() || it.spend < 0.0 {
                return Err(Error::Data(format!(
                    "row {row}: negative or non-finite spend {}",
                    it.spend
                )));
            }
            if it.day < 1 {
                return Err(Error::Data(format!("row {row}: day must be >= 1")));
            }
            if it.game_id >= self.paid_catalog_size {
                return Err(Error::Data(format!(
                    "row {row}: game id {} outside catalog of {}",
                    it.game_id, self.paid_catalog_size
                )));
            }
            if !self.profiles.contains_key(&it.user_id) {
                return Err(Error::Data(format!(
                    "row {row}: user {} has no profile",
                    it.user_id
                )));
            }
        }
        for profile in self.profiles.values() {
            profile.validate(self.download_catalog_size)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    /// Fraction of interactions with zero spend.
    pub fn zero_fraction(&self) -> f64 {
        if self.interactions.is_empty() {
            return 0.0;
        }
        let zeros = self.interactions.iter().filter(|it| it.spend == 0.0).count();
        zeros as f64 / self.interactions.len() as f64
    }

    pub fn profile(&self, user_id: u64) -> Result<&UserProfile> {
        self.profiles
            .get(&user_id)
            .ok_or_else(|| Error::Data(format!("user {user_id} has no profile")))
    }
}

/// Configuration for the synthetic generator. Defaults reproduce the target
/// dataset shape: 432 paid games, 7507 downloadable games, 97.9% zero spends,
/// nonzero median near 11 with a heavy lognormal tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_users: usize,
    pub n_paid_games: u32,
    pub n_download_games: u32,
    pub n_days: u32,
    pub zero_rate: f64,
    pub spend_median: f64,
    /// Lognormal sigma of the spend tail.
    pub tail_shape: f64,
    /// Dimension of the latent preference vectors driving downloads.
    pub latent_dim: usize,
    /// Interactions generated per user.
    pub events_per_user: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_users: 5000,
            n_paid_games: 432,
            n_download_games: 7507,
            n_days: 31,
            zero_rate: 0.979,
            spend_median: 11.0,
            tail_shape: 2.0,
            latent_dim: 8,
            events_per_user: 20,
            seed: 1,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.zero_rate) {
            return Err(Error::Config(format!(
                "zero_rate must be in [0, 1], got {}",
                self.zero_rate
            )));
        }
        if self.n_users < 1
            || self.n_paid_games < 1
            || self.n_download_games < 1
            || self.n_days < 1
            || self.latent_dim < 1
            || self.events_per_user < 1
        {
            return Err(Error::Config("all counts must be >= 1".into()));
        }
        if !(self.spend_median > 0.0) || !(self.tail_shape >= 0.0) {
            return Err(Error::Config(
                "spend_median must be > 0 and tail_shape >= 0".into(),
            ));
        }
        Ok(())
    }
}

//! Label standardization: transform raw spend labels into training targets
//! under five schemes — raw values, log1p, user-sided, game-sided, and the
//! both-sided combination of z-normalized user/game values.
//!
//! All statistics are fitted on the training split once and frozen; held-out
//! rows are transformed with the same `Standardizer`, never refitted.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{build_game_stats, Dataset, GameSpendStats, Interaction, UserProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Raw spend values.
    Ov,
    /// log(1 + spend).
    Log,
    /// Spend over the user's average payment.
    Us,
    /// Z-score against the game's spend history.
    Gs,
    /// Weighted sum of z-normalized game- and user-sided values.
    Bs,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ov" => Ok(Scheme::Ov),
            "log" => Ok(Scheme::Log),
            "us" => Ok(Scheme::Us),
            "gs" => Ok(Scheme::Gs),
            "bs" => Ok(Scheme::Bs),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::Ov => "ov",
            Scheme::Log => "log",
            Scheme::Us => "us",
            Scheme::Gs => "gs",
            Scheme::Bs => "bs",
        };
        f.write_str(s)
    }
}

/// Mean and population std of the game-sided and user-sided label
/// populations over the training split (nonzero rows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub scheme: Scheme,
    pub g_mean: f64,
    pub g_std: f64,
    pub u_mean: f64,
    pub u_std: f64,
}

/// Game-sided standardization: z-score of the spend against the game's
/// historical spend statistics. A degenerate game (std 0) maps to 0.
pub fn game_sided(s_up: f64, stats: &GameSpendStats) -> f64 {
    if stats.std == 0.0 {
        0.0
    } else {
        (s_up - stats.mean) / stats.std
    }
}

/// User-sided standardization: spend over the user's average payment. Cold
/// users (no payments on record) fall back to the training set's global mean
/// nonzero spend as the divisor.
pub fn user_sided(s_up: f64, t180: f64, f180: u32, global_mean_nonzero: f64) -> f64 {
    let divisor = if f180 == 0 || t180 == 0.0 {
        global_mean_nonzero
    } else {
        t180 / f180 as f64
    };
    s_up / divisor
}

fn znorm(value: f64, mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        (value - mean) / std
    } else {
        0.0
    }
}

/// Z-normalize the game- and user-sided values by their population stats and
/// combine with equal weights.
pub fn combine_both_sided(g: f64, u: f64, norm: &NormStats) -> f64 {
    0.5 * znorm(g, norm.g_mean, norm.g_std) + 0.5 * znorm(u, norm.u_mean, norm.u_std)
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Include zero-spend rows in per-game statistics.
    pub include_zeros_in_stats: bool,
    pub game_weight: f64,
    pub user_weight: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            include_zeros_in_stats: false,
            game_weight: 0.5,
            user_weight: 0.5,
        }
    }
}

/// Frozen standardization state: per-game stats, the cold-user divisor, and
/// the normalization populations, all fitted on a training split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub scheme: Scheme,
    pub game_stats: BTreeMap<u32, GameSpendStats>,
    pub global_mean_nonzero: f64,
    pub norm: NormStats,
    pub game_weight: f64,
    pub user_weight: f64,
}

fn population_moments(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Standardizer {
    pub fn fit(train: &Dataset, scheme: Scheme) -> Result<Self> {
        Self::fit_with(train, scheme, FitOptions::default())
    }

    pub fn fit_with(train: &Dataset, scheme: Scheme, opts: FitOptions) -> Result<Self> {
        let game_stats = build_game_stats(train, opts.include_zeros_in_stats)?;
        let nonzero: Vec<&Interaction> = train
            .interactions
            .iter()
            .filter(|it| it.spend > 0.0)
            .collect();
        let global_mean_nonzero = if nonzero.is_empty() {
            1.0
        } else {
            nonzero.iter().map(|it| it.spend).sum::<f64>() / nonzero.len() as f64
        };

        // Zero rows bypass standardization (they get target 0), so the
        // normalization populations are the standardized nonzero labels.
        let mut game_values = Vec::with_capacity(nonzero.len());
        let mut user_values = Vec::with_capacity(nonzero.len());
        for it in &nonzero {
            let profile = train.profile(it.user_id)?;
            user_values.push(user_sided(
                it.spend,
                profile.total_spend_180,
                profile.payment_count_180,
                global_mean_nonzero,
            ));
            if let Some(stats) = game_stats.get(&it.game_id) {
                game_values.push(game_sided(it.spend, stats));
            }
        }
        let (g_mean, g_std) = population_moments(&game_values);
        let (u_mean, u_std) = population_moments(&user_values);

        Ok(Standardizer {
            scheme,
            game_stats,
            global_mean_nonzero,
            norm: NormStats {
                scheme,
                g_mean,
                g_std,
                u_mean,
                u_std,
            },
            game_weight: opts.game_weight,
            user_weight: opts.user_weight,
        })
    }

    /// Training target for one row. Zero-spend rows map to 0 under every
    /// scheme.
    pub fn target_for(&self, it: &Interaction, profile: &UserProfile) -> f64 {
        if it.spend == 0.0 {
            return 0.0;
        }
        self.formula_target(it.spend, it.game_id, profile)
    }

    fn user_value(&self, spend: f64, profile: &UserProfile) -> f64 {
        user_sided(
            spend,
            profile.total_spend_180,
            profile.payment_count_180,
            self.global_mean_nonzero,
        )
    }

    fn formula_target(&self, spend: f64, game_id: u32, profile: &UserProfile) -> f64 {
        match self.scheme {
            Scheme::Ov => spend,
            Scheme::Log => spend.ln_1p(),
            Scheme::Us => self.user_value(spend, profile),
            Scheme::Gs => match self.game_stats.get(&game_id) {
                Some(stats) => game_sided(spend, stats),
                // cold game: user-sided value carries the full weight
                None => self.user_value(spend, profile),
            },
            Scheme::Bs => {
                let zu = znorm(
                    self.user_value(spend, profile),
                    self.norm.u_mean,
                    self.norm.u_std,
                );
                match self.game_stats.get(&game_id) {
                    Some(stats) => {
                        let zg = znorm(
                            game_sided(spend, stats),
                            self.norm.g_mean,
                            self.norm.g_std,
                        );
                        self.game_weight * zg + self.user_weight * zu
                    }
                    None => zu,
                }
            }
        }
    }

    /// Map a predicted target back to the raw spend scale. Every scheme is a
    /// per-row monotone map in the spend; the affine ones are inverted by
    /// probing, and a degenerate slope falls back to the identity.
    pub fn inverse_target(&self, target: f64, game_id: u32, profile: &UserProfile) -> f64 {
        match self.scheme {
            Scheme::Ov => target,
            Scheme::Log => target.exp_m1(),
            _ => {
                let b = self.formula_target(0.0, game_id, profile);
                let a = self.formula_target(1.0, game_id, profile) - b;
                if a.abs() > 1e-12 {
                    (target - b) / a
                } else {
                    target
                }
            }
        }
    }
}

/// A training split paired with its standardized targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub dataset: Dataset,
    pub targets: Vec<f64>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Standardize a training split under `scheme`, returning the labeled set and
/// the frozen standardizer for held-out transforms.
pub fn standardize_dataset(train: &Dataset, scheme: Scheme) -> Result<(LabeledDataset, Standardizer)> {
    standardize_dataset_with(train, scheme, FitOptions::default())
}

pub fn standardize_dataset_with(
    train: &Dataset,
    scheme: Scheme,
    opts: FitOptions,
) -> Result<(LabeledDataset, Standardizer)> {
    let standardizer = Standardizer::fit_with(train, scheme, opts)?;
    let mut targets = Vec::with_capacity(train.len());
    for (row, it) in train.interactions.iter().enumerate() {
        let profile = train.profile(it.user_id)?;
        let target = standardizer.target_for(it, profile);
        if !target.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite standardized target at row {row}"
            )));
        }
        targets.push(target);
    }
    Ok((
        LabeledDataset {
            dataset: train.clone(),
            targets,
        },
        standardizer,
    ))
}

/// Write a labeled set as interactions.jsonl rows plus a `target` field.
pub fn save_labeled_jsonl(path: &Path, labeled: &LabeledDataset) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        user: u64,
        game: u32,
        day: u32,
        spend: f64,
        target: f64,
    }
    let mut w = BufWriter::new(File::create(path)?);
    for (it, &target) in labeled.dataset.interactions.iter().zip(&labeled.targets) {
        let row = Row {
            user: it.user_id,
            game: it.game_id,
            day: it.day,
            spend: it.spend,
            target,
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_norm_stats(path: &Path, norm: &NormStats) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), norm)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, GenConfig};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn stats(mean: f64, std: f64) -> GameSpendStats {
        GameSpendStats {
            count: 3,
            mean,
            std,
        }
    }

    #[test]
    fn game_sided_examples() {
        let s = stats(20.0, 8.164965809277260);
        assert_eq!(game_sided(20.0, &s), 0.0);
        assert!((game_sided(30.0, &s) - 1.224744871391589).abs() < 1e-9);
        assert_eq!(game_sided(42.0, &stats(42.0, 0.0)), 0.0);
    }

    #[test]
    fn user_sided_examples() {
        assert!((user_sided(50.0, 500.0, 10, 33.0) - 1.0).abs() < 1e-12);
        assert_eq!(user_sided(0.0, 500.0, 10, 33.0), 0.0);
        assert!((user_sided(20.0, 0.0, 0, 10.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn combine_examples() {
        let norm = NormStats {
            scheme: Scheme::Bs,
            g_mean: 1.5,
            g_std: 2.0,
            u_mean: 0.8,
            u_std: 0.4,
        };
        assert_eq!(combine_both_sided(1.5, 0.8, &norm), 0.0);
        assert!((combine_both_sided(3.5, 0.8, &norm) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn combine_matches_brute_force(g in -50.0f64..50.0, u in -50.0f64..50.0,
                                       gm in -5.0f64..5.0, gs in 0.1f64..10.0,
                                       um in -5.0f64..5.0, us in 0.1f64..10.0) {
            let norm = NormStats { scheme: Scheme::Bs, g_mean: gm, g_std: gs, u_mean: um, u_std: us };
            let expected = 0.5 * ((g - gm) / gs) + 0.5 * ((u - um) / us);
            prop_assert!((combine_both_sided(g, u, &norm) - expected).abs() < 1e-12);
        }

        #[test]
        fn game_sided_shift_scale_consistent(mean in -100.0f64..100.0, std in 0.01f64..50.0,
                                             s in -200.0f64..200.0, a in 0.01f64..10.0, b in -20.0f64..20.0) {
            let base = stats(mean, std);
            let scaled = stats(a * mean + b, a * std);
            prop_assert!((game_sided(s, &base) - game_sided(a * s + b, &scaled)).abs() < 1e-6);
        }

        #[test]
        fn user_sided_scale_invariant(s in 0.0f64..1e4, t in 0.01f64..1e6, f in 1u32..200, a in 0.01f64..100.0) {
            let before = user_sided(s, t, f, 1.0);
            let after = user_sided(a * s, a * t, f, 1.0);
            prop_assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));
        }
    }

    fn fixture() -> Dataset {
        let cfg = GenConfig {
            n_users: 400,
            seed: 13,
            ..GenConfig::default()
        };
        generate_synthetic(&cfg).unwrap()
    }

    #[test]
    fn ov_is_identity_and_zeros_map_to_zero_everywhere() {
        let ds = fixture();
        let (labeled, _) = standardize_dataset(&ds, Scheme::Ov).unwrap();
        for (it, &t) in ds.interactions.iter().zip(&labeled.targets) {
            assert_eq!(t, it.spend);
        }
        for scheme in [Scheme::Log, Scheme::Us, Scheme::Gs, Scheme::Bs] {
            let (labeled, _) = standardize_dataset(&ds, scheme).unwrap();
            for (it, &t) in ds.interactions.iter().zip(&labeled.targets) {
                assert!(t.is_finite());
                if it.spend == 0.0 {
                    assert_eq!(t, 0.0, "{scheme}: zero spend must map to target 0");
                }
            }
        }
    }

    #[test]
    fn log_of_zero_is_zero() {
        let ds = fixture();
        let (labeled, _) = standardize_dataset(&ds, Scheme::Log).unwrap();
        for (it, &t) in ds.interactions.iter().zip(&labeled.targets) {
            if it.spend == 0.0 {
                assert_eq!(t, 0.0);
            } else {
                assert!((t - (1.0 + it.spend).ln()).abs() < 1e-12);
            }
        }
    }

    fn nonzero_cov(values: impl Iterator<Item = f64>) -> f64 {
        let v: Vec<f64> = values.filter(|&x| x != 0.0).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
        var.sqrt() / mean.abs()
    }

    #[test]
    fn both_sided_compresses_label_variation() {
        let cfg = GenConfig {
            n_users: 2500,
            seed: 17,
            ..GenConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert!(ds.len() >= 50_000);
        let raw_cov = nonzero_cov(ds.interactions.iter().map(|it| it.spend));
        let (labeled, _) = standardize_dataset(&ds, Scheme::Bs).unwrap();
        let bs_cov = nonzero_cov(labeled.targets.iter().copied());
        assert!(
            bs_cov <= 0.25 * raw_cov,
            "bs cov {bs_cov} vs raw cov {raw_cov}"
        );
    }

    #[test]
    fn cold_game_falls_back_to_user_side() {
        let ds = fixture();
        let std = Standardizer::fit(&ds, Scheme::Gs).unwrap();
        let profile = ds.profiles.values().next().unwrap();
        let missing_game = ds.paid_catalog_size + 10;
        let it = Interaction {
            user_id: profile.user_id,
            game_id: missing_game,
            day: 1,
            spend: 25.0,
        };
        let expected = user_sided(
            25.0,
            profile.total_spend_180,
            profile.payment_count_180,
            std.global_mean_nonzero,
        );
        assert!((std.target_for(&it, profile) - expected).abs() < 1e-12);
    }

    #[test]
    fn inverse_recovers_raw_spend() {
        let ds = fixture();
        for scheme in [Scheme::Ov, Scheme::Log, Scheme::Us, Scheme::Gs, Scheme::Bs] {
            let (labeled, std) = standardize_dataset(&ds, scheme).unwrap();
            for (it, &t) in ds.interactions.iter().zip(&labeled.targets).take(2000) {
                if it.spend == 0.0 {
                    continue;
                }
                let profile = ds.profile(it.user_id).unwrap();
                let back = std.inverse_target(t, it.game_id, profile);
                assert!(
                    (back - it.spend).abs() <= 1e-6 * it.spend.abs().max(1.0),
                    "{scheme}: {back} vs {}",
                    it.spend
                );
            }
        }
    }

    #[test]
    fn norm_stats_serialize_shape() {
        let norm = NormStats {
            scheme: Scheme::Bs,
            g_mean: 0.1,
            g_std: 1.0,
            u_mean: 0.2,
            u_std: 2.0,
        };
        let json = serde_json::to_value(&norm).unwrap();
        assert_eq!(json["scheme"], "bs");
        assert!(json.get("g_mean").is_some() && json.get("u_std").is_some());
    }

    #[test]
    fn single_point_game_stats_degenerate_rule() {
        let mut game_stats = BTreeMap::new();
        game_stats.insert(7u32, stats(42.0, 0.0));
        assert_eq!(game_sided(999.0, &game_stats[&7]), 0.0);
    }
}

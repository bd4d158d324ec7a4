//! Temporal splitting and per-game spend statistics.

use std::collections::BTreeMap;

use super::{Dataset, GameSpendStats};
use crate::error::{Error, Result};

/// Split interactions at `train_days`: rows with day <= train_days go to the
/// train set, the rest to test. Profiles are shared by both halves.
pub fn split_temporal(ds: &Dataset, train_days: u32) -> Result<(Dataset, Dataset)> {
    let max_day = ds
        .interactions
        .iter()
        .map(|it| it.day)
        .max()
        .ok_or_else(|| Error::Data("cannot split an empty dataset".into()))?;
    if train_days < 1 || train_days >= max_day {
        return Err(Error::Config(format!(
            "train_days must be in [1, {}), got {train_days}",
            max_day
        )));
    }
    let (train_rows, test_rows): (Vec<_>, Vec<_>) = ds
        .interactions
        .iter()
        .partition(|it| it.day <= train_days);
    let make = |rows: Vec<&super::Interaction>| Dataset {
        interactions: rows.into_iter().copied().collect(),
        profiles: ds.profiles.clone(),
        paid_catalog_size: ds.paid_catalog_size,
        download_catalog_size: ds.download_catalog_size,
        rng_seed: ds.rng_seed,
    };
    Ok((make(train_rows), make(test_rows)))
}

/// Per-game count, mean, and population standard deviation over the training
/// spends. Zero-spend rows are excluded unless `include_zeros`; games with no
/// qualifying rows are absent from the map.
pub fn build_game_stats(
    train: &Dataset,
    include_zeros: bool,
) -> Result<BTreeMap<u32, GameSpendStats>> {
    if train.is_empty() {
        return Err(Error::Data("cannot build game stats from an empty set".into()));
    }
    let mut spends: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for it in &train.interactions {
        if include_zeros || it.spend > 0.0 {
            spends.entry(it.game_id).or_default().push(it.spend);
        }
    }
    let stats = spends
        .into_iter()
        .map(|(game, values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
            (
                game,
                GameSpendStats {
                    count: values.len(),
                    mean,
                    std: var.sqrt(),
                },
            )
        })
        .collect();
    Ok(stats)
}

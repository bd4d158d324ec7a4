//! Dataset file I/O.
//!
//! Interactions are JSONL (`{"user":..,"game":..,"day":..,"spend":..}`) with
//! profiles in a sibling `profiles.jsonl`; a CSV variant with header
//! `user,game,day,spend` is accepted for interactions only. `meta.json`, when
//! present, pins catalog sizes and the generating seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Dataset, Interaction, UserProfile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Jsonl,
    Csv,
}

impl FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(FileFormat::Jsonl),
            "csv" => Ok(FileFormat::Csv),
            other => Err(Error::Config(format!("unknown file format `{other}`"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    paid_catalog_size: u32,
    download_catalog_size: u32,
    rng_seed: u64,
}

pub fn save_interactions_jsonl(path: &Path, rows: &[Interaction]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_interactions_csv(path: &Path, rows: &[Interaction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Data(format!("csv write: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_profiles_jsonl<'a>(
    path: &Path,
    profiles: impl IntoIterator<Item = &'a UserProfile>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for profile in profiles {
        serde_json::to_writer(&mut w, profile)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Write a dataset directory: interactions.jsonl + profiles.jsonl + meta.json.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_interactions_jsonl(&dir.join("interactions.jsonl"), &ds.interactions)?;
    save_profiles_jsonl(&dir.join("profiles.jsonl"), ds.profiles.values())?;
    let meta = DatasetMeta {
        paid_catalog_size: ds.paid_catalog_size,
        download_catalog_size: ds.download_catalog_size,
        rng_seed: ds.rng_seed,
    };
    let file = File::create(dir.join("meta.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &meta)?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    }
}

fn load_interactions_jsonl(path: &Path) -> Result<Vec<Interaction>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Interaction =
            serde_json::from_str(&line).map_err(|e| parse_err(path, idx + 1, e))?;
        rows.push(row);
    }
    Ok(rows)
}

fn load_interactions_csv(path: &Path) -> Result<Vec<Interaction>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (idx, record) in reader.deserialize::<Interaction>().enumerate() {
        let row = record.map_err(|e| parse_err(path, idx + 2, e))?;
        rows.push(row);
    }
    Ok(rows)
}

fn load_profiles_jsonl(path: &Path) -> Result<BTreeMap<u64, UserProfile>> {
    let reader = BufReader::new(File::open(path)?);
    let mut profiles = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let profile: UserProfile =
            serde_json::from_str(&line).map_err(|e| parse_err(path, idx + 1, e))?;
        profiles.insert(profile.user_id, profile);
    }
    Ok(profiles)
}

fn resolve_paths(path: &Path, format: FileFormat) -> Result<(PathBuf, PathBuf, Option<PathBuf>)> {
    let (interactions, dir) = if path.is_dir() {
        let name = match format {
            FileFormat::Jsonl => "interactions.jsonl",
            FileFormat::Csv => "interactions.csv",
        };
        (path.join(name), path.to_path_buf())
    } else {
        let dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        (path.to_path_buf(), dir)
    };
    let profiles = dir.join("profiles.jsonl");
    let meta = dir.join("meta.json");
    let meta = meta.exists().then_some(meta);
    Ok((interactions, profiles, meta))
}

/// Load a dataset from a directory (or an interactions file with a sibling
/// `profiles.jsonl`). All type invariants are enforced; violations abort with
/// the offending row.
pub fn load_dataset(path: &Path, format: FileFormat) -> Result<Dataset> {
    let (interactions_path, profiles_path, meta_path) = resolve_paths(path, format)?;
    if !interactions_path.exists() {
        return Err(Error::Data(format!(
            "missing interactions file {}",
            interactions_path.display()
        )));
    }
    if !profiles_path.exists() {
        return Err(Error::Data(format!(
            "missing profiles file {}",
            profiles_path.display()
        )));
    }
    let interactions = match format {
        FileFormat::Jsonl => load_interactions_jsonl(&interactions_path)?,
        FileFormat::Csv => load_interactions_csv(&interactions_path)?,
    };
    let profiles = load_profiles_jsonl(&profiles_path)?;

    let (paid_catalog_size, download_catalog_size, rng_seed) = match meta_path {
        Some(p) => {
            let meta: DatasetMeta = serde_json::from_reader(BufReader::new(File::open(p)?))?;
            (
                meta.paid_catalog_size,
                meta.download_catalog_size,
                meta.rng_seed,
            )
        }
        None => {
            // Without a meta file the catalogs are the tightest bounds seen.
            let paid = interactions.iter().map(|it| it.game_id + 1).max().unwrap_or(1);
            let download = profiles
                .values()
                .flat_map(|p| p.download_history.iter().map(|&g| g + 1))
                .max()
                .unwrap_or(1);
            (paid, download, 0)
        }
    };

    let ds = Dataset {
        interactions,
        profiles,
        paid_catalog_size,
        download_catalog_size,
        rng_seed,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, content: &str) {
        std::fs::write(path, content).unwrap();
    }

    #[test]
    fn well_formed_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("interactions.jsonl"),
            "{\"user\":1,\"game\":0,\"day\":1,\"spend\":0.0}\n\
             {\"user\":1,\"game\":2,\"day\":3,\"spend\":9.5}\n\
             {\"user\":2,\"game\":1,\"day\":31,\"spend\":0.0}\n",
        );
        write(
            &dir.path().join("profiles.jsonl"),
            "{\"user\":1,\"history\":[4,2],\"t180\":30.0,\"f180\":2}\n\
             {\"user\":2,\"history\":[0],\"t180\":0.0,\"f180\":0}\n",
        );
        let ds = load_dataset(dir.path(), FileFormat::Jsonl).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.paid_catalog_size, 3);
        assert_eq!(ds.download_catalog_size, 5);

        save_dataset(dir.path(), &ds).unwrap();
        let reloaded = load_dataset(dir.path(), FileFormat::Jsonl).unwrap();
        assert_eq!(ds, reloaded);
    }

    #[test]
    fn negative_spend_names_row() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("interactions.jsonl"),
            "{\"user\":1,\"game\":0,\"day\":1,\"spend\":2.0}\n\
             {\"user\":1,\"game\":0,\"day\":1,\"spend\":-1.0}\n",
        );
        write(
            &dir.path().join("profiles.jsonl"),
            "{\"user\":1,\"history\":[0],\"t180\":0.0,\"f180\":0}\n",
        );
        let err = load_dataset(dir.path(), FileFormat::Jsonl).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn over_long_history_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("interactions.jsonl"),
            "{\"user\":1,\"game\":0,\"day\":1,\"spend\":2.0}\n",
        );
        write(
            &dir.path().join("profiles.jsonl"),
            "{\"user\":1,\"history\":[0,1,2,3,4,5,6,7,8,9,10],\"t180\":0.0,\"f180\":0}\n",
        );
        let err = load_dataset(dir.path(), FileFormat::Jsonl).unwrap_err();
        assert!(err.to_string().contains("history length > 10"), "{err}");
    }

    #[test]
    fn malformed_line_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("interactions.jsonl"),
            "{\"user\":1,\"game\":0,\"day\":1,\"spend\":2.0}\n{\"user\":oops}\n",
        );
        write(
            &dir.path().join("profiles.jsonl"),
            "{\"user\":1,\"history\":[0],\"t180\":0.0,\"f180\":0}\n",
        );
        let err = load_dataset(dir.path(), FileFormat::Jsonl).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn csv_variant_loads() {
        let dir = tempfile::tempdir().unwrap();
        write(
            &dir.path().join("interactions.csv"),
            "user,game,day,spend\n1,0,1,0.0\n1,1,2,4.25\n",
        );
        write(
            &dir.path().join("profiles.jsonl"),
            "{\"user\":1,\"history\":[3],\"t180\":10.0,\"f180\":1}\n",
        );
        let ds = load_dataset(dir.path(), FileFormat::Csv).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.interactions[1].spend, 4.25);
    }
}

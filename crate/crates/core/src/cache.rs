//! Store for the `N`-dependent building blocks (minimum, FG patterns and
//! normal-mode spectrum).
//!
//! Entries are pretty-printed JSON files named by a SHA-256 key over the
//! interaction fingerprint, the spin populations and [`CONVENTIONS_VERSION`],
//! so a change of conventions silently invalidates old files. An in-memory
//! layer behind an `RwLock` serves concurrent readers.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::geometry::SymmetricMinimum;
use crate::model::SystemSpec;
use crate::spectrum::{FGPatterns, NormalModeSpectrum};

/// Bump whenever scaling, normalization or payload layout changes.
pub const CONVENTIONS_VERSION: &str = "spt-conventions-1";

/// Everything the energy assembly needs that does not depend on the
/// occupancy or the target dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingBlocks {
    pub minimum: SymmetricMinimum,
    pub patterns: FGPatterns,
    /// Carries `v₀`.
    pub spectrum: NormalModeSpectrum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub conventions: String,
    pub model: String,
    pub n_up: usize,
    pub n_down: usize,
    pub payload: BuildingBlocks,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

#[derive(Debug, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<String, CacheEntry>>,
}

impl Cache {
    /// Cache that lives only as long as the process.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Cache persisted under `dir`, created if missing.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            memory: RwLock::default(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn key(spec: &SystemSpec) -> String {
        let text = format!(
            "{CONVENTIONS_VERSION}|{}|{}|{}",
            spec.interaction.fingerprint(),
            spec.n_up,
            spec.n_down
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get(&self, spec: &SystemSpec) -> Result<Option<CacheEntry>> {
        let key = Self::key(spec);
        if let Some(e) = self.memory.read().expect("cache lock poisoned").get(&key) {
            return Ok(Some(e.clone()));
        }
        let Some(path) = self.path_for(&key) else {
            return Ok(None);
        };
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let entry: CacheEntry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(err) => {
                log::warn!("ignoring unreadable cache file {}: {err}", path.display());
                return Ok(None);
            }
        };
        if entry.key != key || entry.conventions != CONVENTIONS_VERSION {
            return Ok(None);
        }
        self.memory
            .write()
            .expect("cache lock poisoned")
            .insert(key, entry.clone());
        Ok(Some(entry))
    }

    pub fn put(&self, spec: &SystemSpec, payload: BuildingBlocks) -> Result<CacheEntry> {
        let key = Self::key(spec);
        let entry = CacheEntry {
            key: key.clone(),
            conventions: CONVENTIONS_VERSION.to_string(),
            model: spec.interaction.fingerprint(),
            n_up: spec.n_up,
            n_down: spec.n_down,
            payload,
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        };
        let mut memory = self.memory.write().expect("cache lock poisoned");
        if let Some(path) = self.path_for(&key) {
            // Write-then-rename keeps readers from seeing partial files.
            let tmp = path.with_extension(format!("json.{}.tmp", std::process::id()));
            fs::write(&tmp, serde_json::to_string_pretty(&entry)?)?;
            fs::rename(&tmp, &path)?;
        }
        memory.insert(key, entry.clone());
        Ok(entry)
    }

    /// Entries on disk (or in memory for an in-memory cache), sorted by
    /// populations then key.
    pub fn list(&self) -> Result<Vec<CacheEntry>> {
        let mut out: Vec<CacheEntry> = match &self.dir {
            None => self
                .memory
                .read()
                .expect("cache lock poisoned")
                .values()
                .cloned()
                .collect(),
            Some(dir) => {
                let mut v = Vec::new();
                for item in fs::read_dir(dir)? {
                    let path = item?.path();
                    if path.extension().and_then(|e| e.to_str()) != Some("json") {
                        continue;
                    }
                    match serde_json::from_str::<CacheEntry>(&fs::read_to_string(&path)?) {
                        Ok(e) => v.push(e),
                        Err(err) => log::warn!("skipping {}: {err}", path.display()),
                    }
                }
                v
            }
        };
        out.sort_by(|a, b| {
            (a.n_up + a.n_down, a.n_up, &a.model, &a.key).cmp(&(
                b.n_up + b.n_down,
                b.n_up,
                &b.model,
                &b.key,
            ))
        });
        Ok(out)
    }

    /// Removes every entry; returns how many were removed.
    pub fn clear(&self) -> Result<usize> {
        let mut memory = self.memory.write().expect("cache lock poisoned");
        let mut removed = memory.len();
        memory.clear();
        if let Some(dir) = &self.dir {
            removed = 0;
            for item in fs::read_dir(dir)? {
                let path = item?.path();
                if path.extension().and_then(|e| e.to_str()) == Some("json") {
                    fs::remove_file(&path)?;
                    removed += 1;
                }
            }
        }
        Ok(removed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::InteractionModel;

    #[test]
    fn keys_separate_models_and_populations() {
        let a = SystemSpec::new(3, 3, InteractionModel::HarmonicPair { coupling: 0.1 });
        let mut b = a.clone();
        b.interaction = InteractionModel::HarmonicPair {
            coupling: 0.1 + 1e-15,
        };
        let c = SystemSpec::new(4, 2, a.interaction.clone());
        assert_ne!(Cache::key(&a), Cache::key(&b));
        assert_ne!(Cache::key(&a), Cache::key(&c));
        assert_eq!(Cache::key(&a), Cache::key(&a.clone()));
        assert_eq!(Cache::key(&a).len(), 64);
    }

    #[test]
    fn trap_frequency_does_not_change_the_key() {
        let a = SystemSpec::new(3, 3, InteractionModel::NonInteracting);
        let mut b = a.clone();
        b.trap_frequency = 2.0;
        assert_eq!(Cache::key(&a), Cache::key(&b));
    }
}

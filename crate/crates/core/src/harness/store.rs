//! Content-addressed result store: `objects/<config hash>.json` plus `index.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunResult;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub experiment: String,
    pub seed: u64,
    pub object: String,
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("objects"))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn object_path(&self, hash: &str) -> PathBuf {
        self.root.join("objects").join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> Result<Option<RunResult>> {
        let p = self.object_path(hash);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(serde_json::from_slice(&fs::read(p)?)?))
    }

    /// Writes the object and updates the index; each file is replaced atomically.
    pub fn put(&self, result: &RunResult) -> Result<PathBuf> {
        let p = self.object_path(&result.config_hash);
        write_atomic(&p, &serde_json::to_vec_pretty(result)?)?;
        let mut index = self.index()?;
        index.insert(
            result.config_hash.clone(),
            IndexEntry {
                experiment: result.config.experiment.name().into(),
                seed: result.config.seed,
                object: format!("objects/{}.json", result.config_hash),
            },
        );
        write_atomic(&self.root.join("index.json"), &serde_json::to_vec_pretty(&index)?)?;
        Ok(p)
    }

    pub fn index(&self) -> Result<BTreeMap<String, IndexEntry>> {
        let p = self.root.join("index.json");
        if !p.exists() {
            return Ok(BTreeMap::new());
        }
        Ok(serde_json::from_slice(&fs::read(p)?)?)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

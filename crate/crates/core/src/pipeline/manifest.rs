//! Content-hashed registry of every file in a dataset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub frames: usize,
    pub views: Vec<u32>,
    /// Dataset-relative path (with `/` separators) to SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn relative_key(root: &Path, path: &Path) -> Result<String> {
    let rel = path.strip_prefix(root).map_err(|_| {
        Error::validation(format!("{} is outside the dataset {}", path.display(), root.display()))
    })?;
    Ok(rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/"))
}

impl SequenceManifest {
    pub fn new(config_hash: String, frames: usize, views: Vec<u32>) -> Self {
        SequenceManifest {
            tool_version: TOOL_VERSION.to_string(),
            config_hash,
            frames,
            views,
            files: BTreeMap::new(),
        }
    }

    /// Reads the manifest and checks that every registered file exists.
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: SequenceManifest = serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "manifest",
            path: path.clone(),
            message: e.to_string(),
        })?;
        let missing: Vec<&String> = m.files.keys().filter(|k| !root.join(k).is_file()).collect();
        if !missing.is_empty() {
            return Err(Error::validation(format!(
                "manifest references {} missing file(s), first: {}",
                missing.len(),
                missing[0]
            )));
        }
        Ok(m)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Hashes `path` (inside `root`) and records it.
    pub fn register(&mut self, root: &Path, path: &Path) -> Result<()> {
        let key = relative_key(root, path)?;
        let digest = sha256_file(path)?;
        self.files.insert(key, digest);
        Ok(())
    }

    pub fn register_all(&mut self, root: &Path, paths: &[PathBuf]) -> Result<()> {
        paths.iter().try_for_each(|p| self.register(root, p))
    }

    /// Drops every entry below a dataset-relative directory.
    pub fn forget_prefix(&mut self, prefix: &str) {
        let prefix = format!("{}/", prefix.trim_end_matches('/'));
        self.files.retain(|k, _| !k.starts_with(&prefix));
    }

    /// Files whose current hash differs from the registered one, or that are
    /// gone.
    pub fn verify(&self, root: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|(k, digest)| sha256_file(&root.join(k)).map_or(true, |d| &d != *digest))
            .map(|(k, _)| k.clone())
            .collect()
    }
}

//! JSON descriptor cache: one document per label space, keyed by the
//! normalized label, with keys in sorted order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::DescriptorSet;
use crate::label::ActionClass;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("failed to read descriptor cache {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("descriptor cache {path} is not valid JSON: {source}")]
    Format {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("failed to write descriptor cache {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub decomposition: Vec<String>,
    pub description: String,
    pub context: String,
    pub objects: Vec<String>,
    pub llm_model_id: String,
    pub generated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default)]
pub struct DescriptorCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, CacheEntry>,
}

impl DescriptorCache {
    /// A cache that never touches the filesystem.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens the cache at `path`; a missing file is an empty cache.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, CacheError> {
        let path = path.into();
        let entries = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|source| CacheError::Format {
                path: path.display().to_string(),
                source,
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(source) => {
                return Err(CacheError::Read {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        Ok(Self { path: Some(path), entries })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Returns the cached set for `action` if it was produced by `model_id`
    /// and still satisfies the descriptor invariants.
    pub fn get(&self, action: &ActionClass, model_id: &str) -> Option<DescriptorSet> {
        let e = self.entries.get(action.display())?;
        if e.llm_model_id != model_id {
            return None;
        }
        let ds = DescriptorSet {
            action: action.clone(),
            decomposition: e.decomposition.clone(),
            description: e.description.clone(),
            context: e.context.clone(),
            objects: e.objects.clone(),
            llm_model_id: e.llm_model_id.clone(),
            generated_at: e.generated_at,
        };
        match ds.validate() {
            Ok(()) => Some(ds),
            Err(err) => {
                log::warn!("ignoring invalid cache entry for {:?}: {err}", action.display());
                None
            }
        }
    }

    pub fn insert(&mut self, ds: &DescriptorSet) {
        self.entries.insert(
            ds.action.display().to_string(),
            CacheEntry {
                decomposition: ds.decomposition.clone(),
                description: ds.description.clone(),
                context: ds.context.clone(),
                objects: ds.objects.clone(),
                llm_model_id: ds.llm_model_id.clone(),
                generated_at: ds.generated_at,
            },
        );
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.entries).expect("cache entries serialize");
        s.push('\n');
        s
    }

    /// Writes the whole document through a temporary file and a rename. No-op
    /// for in-memory caches.
    pub fn save(&self) -> Result<(), CacheError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let write_err = |source| CacheError::Write {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(write_err)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()).map_err(write_err)?;
        std::fs::rename(&tmp, path).map_err(write_err)
    }
}

//! Versioned layout persistence in a single JSON file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use synclay::LayoutJson;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("layout {0} not found")]
    NotFound(String),
    #[error("layout {id} is at version {current}, not {expected}")]
    Conflict { id: String, expected: u64, current: u64 },
    #[error("store file {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredLayout {
    pub id: String,
    /// Starts at 1, bumped on every write.
    pub version: u64,
    pub layout: LayoutJson,
    pub updated: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Contents {
    next_id: u64,
    layouts: BTreeMap<String, StoredLayout>,
}

/// Layouts keyed by id. Writes are serialized; with a path, every write
/// rewrites the file atomically.
#[derive(Debug)]
pub struct LayoutStore {
    path: Option<PathBuf>,
    inner: Mutex<Contents>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Page {
    pub items: Vec<StoredLayout>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

fn now() -> String {
    humantime::format_rfc3339_millis(SystemTime::now()).to_string()
}

impl LayoutStore {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            inner: Mutex::new(Contents::default()),
        }
    }

    /// Opens `path`, creating an empty store when it does not exist.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |e: &dyn std::fmt::Display| StoreError::Io {
            path: path.clone(),
            message: e.to_string(),
        };
        let contents = if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| io(&e))?;
            serde_json::from_str(&text).map_err(|e| io(&e))?
        } else {
            Contents::default()
        };
        Ok(Self {
            path: Some(path),
            inner: Mutex::new(contents),
        })
    }

    fn persist(&self, c: &Contents) -> Result<(), StoreError> {
        let Some(path) = &self.path else { return Ok(()) };
        let io = |e: std::io::Error| StoreError::Io {
            path: path.clone(),
            message: e.to_string(),
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(c).expect("store serializes")).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Contents> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn create(&self, layout: LayoutJson) -> Result<StoredLayout, StoreError> {
        let mut c = self.lock();
        c.next_id += 1;
        let stored = StoredLayout {
            id: format!("L{:06}", c.next_id),
            version: 1,
            layout,
            updated: now(),
        };
        c.layouts.insert(stored.id.clone(), stored.clone());
        self.persist(&c)?;
        Ok(stored)
    }

    pub fn get(&self, id: &str) -> Result<StoredLayout, StoreError> {
        self.lock().layouts.get(id).cloned().ok_or_else(|| StoreError::NotFound(id.into()))
    }

    /// Replaces the layout if it is still at `expected` version.
    pub fn update(&self, id: &str, layout: LayoutJson, expected: u64) -> Result<StoredLayout, StoreError> {
        let mut c = self.lock();
        let entry = c.layouts.get_mut(id).ok_or_else(|| StoreError::NotFound(id.into()))?;
        if entry.version != expected {
            return Err(StoreError::Conflict {
                id: id.into(),
                expected,
                current: entry.version,
            });
        }
        entry.version += 1;
        entry.layout = layout;
        entry.updated = now();
        let out = entry.clone();
        self.persist(&c)?;
        Ok(out)
    }

    /// Deletes the layout; with `expected`, only at that version.
    pub fn delete(&self, id: &str, expected: Option<u64>) -> Result<(), StoreError> {
        let mut c = self.lock();
        let current = c.layouts.get(id).ok_or_else(|| StoreError::NotFound(id.into()))?.version;
        if let Some(expected) = expected.filter(|&e| e != current) {
            return Err(StoreError::Conflict {
                id: id.into(),
                expected,
                current,
            });
        }
        c.layouts.remove(id);
        self.persist(&c)
    }

    /// Layouts in id order.
    pub fn list(&self, offset: usize, limit: usize) -> Page {
        let c = self.lock();
        Page {
            items: c.layouts.values().skip(offset).take(limit).cloned().collect(),
            total: c.layouts.len(),
            offset,
            limit,
        }
    }
}

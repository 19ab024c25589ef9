//! Curation batches persisted as `{batch_id}.json` files.
//!
//! Reads go straight to disk. Writes to one batch hold that batch's lock for
//! the whole read-validate-write cycle and replace the file atomically.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use quizsmith::curation::{
    curate, export_quiz, is_valid_batch_id, BatchStatus, CurationBatch, CurationResult, Quiz, Violation,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{read_json, write_json_atomic};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown batch {0:?}")]
    NotFound(String),
    #[error("batch {0:?} is already curated")]
    AlreadyCurated(String),
    #[error("batch {0:?} already exists")]
    Exists(String),
    #[error("batch {0:?} has not been curated")]
    NotCurated(String),
    #[error("curation rejected: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub batch_id: String,
    pub status: BatchStatus,
}

#[derive(Debug, Default)]
pub struct BatchStore {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl BatchStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BatchStore {
            dir: dir.into(),
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !is_valid_batch_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Every stored batch, sorted by id.
    pub fn list(&self) -> Result<Vec<BatchSummary>, StoreError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(StoreError::Io(e.to_string())),
        };
        let mut out = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| StoreError::Io(e.to_string()))?.path();
            let Some(id) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".json"))
            else {
                continue;
            };
            if !is_valid_batch_id(id) {
                continue;
            }
            let batch = self.get(id)?;
            out.push(BatchSummary {
                batch_id: batch.batch_id,
                status: batch.status,
            });
        }
        out.sort_by(|a, b| a.batch_id.cmp(&b.batch_id));
        Ok(out)
    }

    pub fn get(&self, id: &str) -> Result<CurationBatch, StoreError> {
        let path = self.path(id)?;
        if !path.exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let batch: CurationBatch = read_json(&path).map_err(|e| StoreError::Io(format!("{e:#}")))?;
        if batch.batch_id != id {
            return Err(StoreError::Io(format!(
                "{} holds batch {:?}",
                path.display(),
                batch.batch_id
            )));
        }
        Ok(batch)
    }

    pub fn create(&self, batch: &CurationBatch) -> Result<(), StoreError> {
        batch.check_shape().map_err(|e| StoreError::Io(e.to_string()))?;
        let path = self.path(&batch.batch_id)?;
        let lock = self.lock(&batch.batch_id);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        if path.exists() {
            return Err(StoreError::Exists(batch.batch_id.clone()));
        }
        fs::create_dir_all(&self.dir).map_err(|e| StoreError::Io(e.to_string()))?;
        write_json_atomic(&path, batch).map_err(|e| StoreError::Io(format!("{e:#}")))
    }

    /// Validates `result` against the open batch and persists it.
    pub fn submit(&self, id: &str, result: CurationResult) -> Result<CurationBatch, StoreError> {
        let path = self.path(id)?;
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut batch = self.get(id)?;
        if batch.status == BatchStatus::Curated {
            return Err(StoreError::AlreadyCurated(id.to_string()));
        }
        curate(&mut batch, result).map_err(StoreError::Invalid)?;
        write_json_atomic(&path, &batch).map_err(|e| StoreError::Io(format!("{e:#}")))?;
        Ok(batch)
    }

    pub fn export(&self, id: &str) -> Result<Quiz, StoreError> {
        let batch = self.get(id)?;
        export_quiz(&batch).map_err(|_| StoreError::NotCurated(id.to_string()))
    }
}

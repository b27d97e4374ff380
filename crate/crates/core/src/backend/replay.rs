//! Append-only JSON-lines replay store keyed by request hash.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{BackendError, ScoreRequest, ScoringBackend, TokenProbSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key: String,
    pub request: ScoreRequest,
    pub series: TokenProbSeries,
}

impl ReplayRecord {
    pub fn new(request: ScoreRequest, series: TokenProbSeries) -> Self {
        Self {
            key: request.cache_key(),
            request,
            series,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreMode {
    ReadOnly,
    ReadWrite,
}

/// Single-writer, many-reader cache of scored requests.
#[derive(Debug)]
pub struct ReplayStore {
    path: PathBuf,
    mode: StoreMode,
    index: RwLock<HashMap<String, TokenProbSeries>>,
    writer: Mutex<Option<BufWriter<File>>>,
}

fn io_err(err: std::io::Error) -> BackendError {
    BackendError::StoreIo {
        line: None,
        message: err.to_string(),
    }
}

impl ReplayStore {
    /// Opens `path`, loading every record. In read-write mode a missing file
    /// is created; in read-only mode it is treated as an empty store.
    pub fn open(path: impl AsRef<Path>, mode: StoreMode) -> Result<Self, BackendError> {
        let path = path.as_ref().to_path_buf();
        let mut index = HashMap::new();
        match File::open(&path) {
            Ok(file) => {
                for (i, line) in BufReader::new(file).lines().enumerate() {
                    let lineno = i + 1;
                    let line = line.map_err(|e| BackendError::StoreIo {
                        line: Some(lineno),
                        message: e.to_string(),
                    })?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let record: ReplayRecord =
                        serde_json::from_str(&line).map_err(|e| BackendError::StoreIo {
                            line: Some(lineno),
                            message: e.to_string(),
                        })?;
                    if record.request.cache_key() != record.key {
                        return Err(BackendError::StoreIo {
                            line: Some(lineno),
                            message: "key does not match the stored request".into(),
                        });
                    }
                    index.insert(record.key, record.series);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(io_err(e)),
        }

        let writer = match mode {
            StoreMode::ReadOnly => None,
            StoreMode::ReadWrite => {
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .map_err(io_err)?;
                Some(BufWriter::new(file))
            }
        };

        Ok(Self {
            path,
            mode,
            index: RwLock::new(index),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn mode(&self) -> StoreMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("replay index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, key: &str) -> Option<TokenProbSeries> {
        self.index
            .read()
            .expect("replay index poisoned")
            .get(key)
            .cloned()
    }

    /// Appends `record` unless its key is already present. Returns whether a
    /// line was written.
    pub fn append(&self, record: ReplayRecord) -> Result<bool, BackendError> {
        let mut writer = self.writer.lock().expect("replay writer poisoned");
        let Some(out) = writer.as_mut() else {
            return Err(BackendError::StoreIo {
                line: None,
                message: "store is read-only".into(),
            });
        };
        if self.lookup(&record.key).is_some() {
            return Ok(false);
        }
        let line = serde_json::to_string(&record).map_err(|e| BackendError::StoreIo {
            line: None,
            message: e.to_string(),
        })?;
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
        out.flush().map_err(io_err)?;
        self.index
            .write()
            .expect("replay index poisoned")
            .insert(record.key, record.series);
        Ok(true)
    }
}

/// Serves `request` from `store`, fetching from `backend` on a miss when the
/// store is writable. `backend = None` is replay-only operation.
pub fn cache_lookup_or_fetch(
    request: &ScoreRequest,
    store: &ReplayStore,
    backend: Option<&dyn ScoringBackend>,
) -> Result<TokenProbSeries, BackendError> {
    request.validate()?;
    let key = request.cache_key();
    if let Some(series) = store.lookup(&key) {
        return Ok(series);
    }
    match (store.mode(), backend) {
        (StoreMode::ReadWrite, Some(backend)) => {
            let series = backend.score(request)?;
            store.append(ReplayRecord {
                key,
                request: request.clone(),
                series: series.clone(),
            })?;
            Ok(series)
        }
        _ => Err(BackendError::ReplayMiss { key }),
    }
}

/// A backend that consults a [`ReplayStore`] before an optional inner
/// backend, counting hits and upstream fetches.
pub struct CachedBackend {
    store: ReplayStore,
    inner: Option<Box<dyn ScoringBackend>>,
    hits: AtomicUsize,
    fetches: AtomicUsize,
}

impl CachedBackend {
    pub fn new(store: ReplayStore, inner: Option<Box<dyn ScoringBackend>>) -> Self {
        Self {
            store,
            inner,
            hits: AtomicUsize::new(0),
            fetches: AtomicUsize::new(0),
        }
    }

    pub fn store(&self) -> &ReplayStore {
        &self.store
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    /// Calls forwarded to the inner backend.
    pub fn fetches(&self) -> usize {
        self.fetches.load(Ordering::Relaxed)
    }
}

impl ScoringBackend for CachedBackend {
    fn score(&self, request: &ScoreRequest) -> Result<TokenProbSeries, BackendError> {
        let key = request.cache_key();
        if let Some(series) = self.store.lookup(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(series);
        }
        if self.inner.is_some() && self.store.mode() == StoreMode::ReadWrite {
            self.fetches.fetch_add(1, Ordering::Relaxed);
        }
        cache_lookup_or_fetch(request, &self.store, self.inner.as_deref())
    }

    fn count_tokens(&self, text: &str) -> usize {
        match &self.inner {
            Some(inner) => inner.count_tokens(text),
            None => text.split_whitespace().count(),
        }
    }
}

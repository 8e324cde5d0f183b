//! Plain-file persistence.
//!
//! ```text
//! <root>/levels/<level_id>.json
//! <root>/sessions/<session_id>.json
//! <root>/reports/<session_id>.metrics.json, *.csv, *.correlation.json
//! ```
//!
//! Every write goes to a temporary file in the target directory and is
//! renamed into place, so readers see either the old or the new document.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::engine::{RestoreError, SessionDocument, SessionState};
use crate::level::{LevelParseError, LevelSpec};
use crate::metrics::MetricsReport;
use crate::pairs::{records_to_csv, CorrelationReport, DistanceRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("corrupt document {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("level file {path}: {source}")]
    Level {
        path: PathBuf,
        source: LevelParseError,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound(_) => "not_found",
            StoreError::Corrupt { .. } => "corrupt_document",
            StoreError::UnknownLevel(_) => "unknown_level",
            StoreError::Level { .. } => "level_parse_error",
            StoreError::Io { .. } => "io_error",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Writes `bytes` to `path` via temp-file-then-rename in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .suffix(".partial")
        .tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Fault-injection hook: behaves like a writer killed after `written`
/// bytes of `bytes` reached the temporary file. The partial temp file is
/// left behind and `path` is never touched.
#[doc(hidden)]
pub fn write_atomic_interrupted(path: &Path, bytes: &[u8], written: usize) -> io::Result<PathBuf> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .suffix(".partial")
        .tempfile_in(dir)?;
    tmp.write_all(&bytes[..written.min(bytes.len())])?;
    let (_, kept) = tmp.keep().map_err(|e| e.error)?;
    Ok(kept)
}

pub fn parse_document<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, StoreError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| StoreError::Corrupt {
        path: path.to_owned(),
        message: format!("at `{}`: {}", e.path(), e.inner()),
    })?;
    de.end().map_err(|e| StoreError::Corrupt {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn read_session_document(path: &Path) -> Result<SessionDocument, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_document(path, &text)
}

pub fn read_level(path: &Path) -> Result<LevelSpec, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    LevelSpec::parse(&text).map_err(|source| StoreError::Level {
        path: path.to_owned(),
        source,
    })
}

/// Restores a session from its document by replaying it.
pub fn restore_session(
    path: &Path,
    doc: &SessionDocument,
    level: Arc<LevelSpec>,
) -> Result<SessionState, StoreError> {
    SessionState::replay(doc, level).map_err(|e: RestoreError| StoreError::Corrupt {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = Self { root: root.into() };
        for dir in [store.levels_dir(), store.sessions_dir(), store.reports_dir()] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn levels_dir(&self) -> PathBuf {
        self.root.join("levels")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.root.join("sessions")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn session_path(&self, session_id: &str) -> PathBuf {
        self.sessions_dir().join(format!("{session_id}.json"))
    }

    pub fn metrics_path(&self, session_id: &str) -> PathBuf {
        self.reports_dir().join(format!("{session_id}.metrics.json"))
    }

    pub fn save_level(&self, level: &LevelSpec) -> Result<PathBuf, StoreError> {
        let path = self.levels_dir().join(format!("{}.json", level.level_id));
        write_atomic(&path, level.to_canonical_json().as_bytes()).map_err(io_err(&path))?;
        Ok(path)
    }

    /// Levels stored under `levels/`, sorted by difficulty rank then id.
    pub fn load_levels(&self) -> Result<Vec<LevelSpec>, StoreError> {
        load_levels_dir(&self.levels_dir())
    }

    pub fn save_session(&self, state: &SessionState) -> Result<PathBuf, StoreError> {
        let path = self.session_path(state.session_id());
        write_atomic(&path, state.to_canonical_json().as_bytes()).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn load_session_document(&self, session_id: &str) -> Result<SessionDocument, StoreError> {
        let path = self.session_path(session_id);
        match fs::read_to_string(&path) {
            Ok(text) => parse_document(&path, &text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(StoreError::NotFound(session_id.to_owned()))
            }
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Loads and replays a session. `level_for` resolves the document's
    /// `level_id`.
    pub fn load_session(
        &self,
        session_id: &str,
        level_for: impl FnOnce(&str) -> Option<Arc<LevelSpec>>,
    ) -> Result<SessionState, StoreError> {
        let doc = self.load_session_document(session_id)?;
        let level = level_for(&doc.level_id).ok_or_else(|| StoreError::UnknownLevel(doc.level_id.clone()))?;
        restore_session(&self.session_path(session_id), &doc, level)
    }

    /// Ids of all stored sessions, sorted.
    pub fn list_sessions(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.sessions_dir();
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                if name.starts_with('.') {
                    return None;
                }
                name.strip_suffix(".json").map(str::to_owned)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn save_metrics(&self, report: &MetricsReport) -> Result<PathBuf, StoreError> {
        let path = self.metrics_path(&report.session_id);
        write_atomic(&path, report.to_canonical_json().as_bytes()).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn load_metrics(&self, session_id: &str) -> Result<MetricsReport, StoreError> {
        let path = self.metrics_path(session_id);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        parse_document(&path, &text)
    }

    pub fn save_pairs(&self, name: &str, records: &[DistanceRecord]) -> Result<PathBuf, StoreError> {
        let path = self.reports_dir().join(format!("{name}.csv"));
        write_atomic(&path, records_to_csv(records).as_bytes()).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn save_correlation(&self, name: &str, report: &CorrelationReport) -> Result<PathBuf, StoreError> {
        let path = self.reports_dir().join(format!("{name}.correlation.json"));
        write_atomic(&path, report.to_canonical_json().as_bytes()).map_err(io_err(&path))?;
        Ok(path)
    }
}

pub fn load_levels_dir(dir: &Path) -> Result<Vec<LevelSpec>, StoreError> {
    let mut levels = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if !hidden && path.extension().is_some_and(|e| e == "json") {
            levels.push(read_level(&path)?);
        }
    }
    levels.sort_by(|a, b| {
        (a.difficulty_rank, &a.level_id).cmp(&(b.difficulty_rank, &b.level_id))
    });
    Ok(levels)
}

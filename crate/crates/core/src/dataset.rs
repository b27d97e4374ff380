//! Canonical evaluation-example schema and JSON-lines loader.
//!
//! One object per line:
//!
//! ```json
//! {"id":"a","dataset":"d","split":"test","document":"...","summary":"...","label":1}
//! ```
//!
//! Detection files carry `label` (1 = consistent, 0 = inconsistent); rating
//! files carry a finite `rating`. `system` and `error_types` are optional.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: mode mismatch: {message}")]
    ModeMismatch { line: usize, message: String },
    #[error("duplicate id {id:?} on line {line}")]
    DuplicateId { line: usize, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected val or test)")),
        }
    }
}

/// Grouped error taxonomy: semantic-frame, discourse, content-verifiability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorType {
    Sem,
    Disc,
    CVer,
}

impl ErrorType {
    pub const ALL: [ErrorType; 3] = [ErrorType::Sem, ErrorType::Disc, ErrorType::CVer];
}

impl std::fmt::Display for ErrorType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorType::Sem => "Sem",
            ErrorType::Disc => "Disc",
            ErrorType::CVer => "CVer",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalExample {
    pub id: String,
    pub dataset: String,
    pub split: Split,
    pub document: String,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_types: Option<BTreeSet<ErrorType>>,
}

impl EvalExample {
    /// `label == 1`.
    pub fn is_consistent(&self) -> Option<bool> {
        self.label.map(|l| l == 1)
    }

    fn check(&self) -> Result<(), String> {
        if self.document.trim().is_empty() {
            return Err("document is empty".into());
        }
        if self.summary.trim().is_empty() {
            return Err("summary is empty".into());
        }
        match (self.label, self.rating) {
            (None, None) => return Err("neither label nor rating is present".into()),
            (Some(_), Some(_)) => return Err("both label and rating are present".into()),
            (Some(l), None) if l > 1 => return Err(format!("label must be 0 or 1, got {l}")),
            (None, Some(r)) if !r.is_finite() => return Err(format!("rating {r} is not finite")),
            _ => {}
        }
        if matches!(&self.error_types, Some(set) if set.is_empty()) {
            return Err("error_types, when present, must be non-empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    Detection,
    Rating,
}

impl std::str::FromStr for DatasetMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detection" => Ok(DatasetMode::Detection),
            "rating" => Ok(DatasetMode::Rating),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub path: PathBuf,
    pub mode: DatasetMode,
    pub counts: SplitCounts,
}

fn parse_line(line: &str, lineno: usize) -> Result<EvalExample, DatasetError> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
        line: lineno,
        message: e.to_string(),
    })?;
    let example: EvalExample = serde_json::from_value(value).map_err(|e| DatasetError::Schema {
        line: lineno,
        message: e.to_string(),
    })?;
    example.check().map_err(|message| DatasetError::Schema {
        line: lineno,
        message,
    })?;
    Ok(example)
}

fn mode_of(example: &EvalExample) -> DatasetMode {
    if example.label.is_some() {
        DatasetMode::Detection
    } else {
        DatasetMode::Rating
    }
}

fn read_examples(path: &Path) -> Result<Vec<(usize, EvalExample)>, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| DatasetError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let example = parse_line(&line, lineno)?;
        if !ids.insert(example.id.clone()) {
            return Err(DatasetError::DuplicateId {
                line: lineno,
                id: example.id,
            });
        }
        out.push((lineno, example));
    }
    Ok(out)
}

fn finish(
    path: &Path,
    mode: DatasetMode,
    rows: Vec<(usize, EvalExample)>,
) -> Result<(Vec<EvalExample>, DatasetManifest), DatasetError> {
    for (line, example) in &rows {
        let found = mode_of(example);
        if found != mode {
            return Err(DatasetError::ModeMismatch {
                line: *line,
                message: format!("expected a {mode:?} example, found a {found:?} example"),
            });
        }
    }
    let examples: Vec<EvalExample> = rows.into_iter().map(|(_, e)| e).collect();
    let counts = SplitCounts {
        val: examples.iter().filter(|e| e.split == Split::Val).count(),
        test: examples.iter().filter(|e| e.split == Split::Test).count(),
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok((
        examples,
        DatasetManifest {
            name,
            path: path.to_path_buf(),
            mode,
            counts,
        },
    ))
}

/// Loads and validates a dataset, requiring every row to match `mode`.
pub fn load_dataset(
    path: impl AsRef<Path>,
    mode: DatasetMode,
) -> Result<(Vec<EvalExample>, DatasetManifest), DatasetError> {
    let path = path.as_ref();
    finish(path, mode, read_examples(path)?)
}

/// Like [`load_dataset`], taking the mode from the first row. An empty file
/// loads as an empty detection dataset.
pub fn load_dataset_any(
    path: impl AsRef<Path>,
) -> Result<(Vec<EvalExample>, DatasetManifest), DatasetError> {
    let path = path.as_ref();
    let rows = read_examples(path)?;
    let mode = rows
        .first()
        .map(|(_, e)| mode_of(e))
        .unwrap_or(DatasetMode::Detection);
    finish(path, mode, rows)
}

pub fn split_filter(examples: &[EvalExample], split: Split) -> Vec<EvalExample> {
    examples
        .iter()
        .filter(|e| e.split == split)
        .cloned()
        .collect()
}

pub fn write_jsonl(examples: &[EvalExample], mut out: impl Write) -> std::io::Result<()> {
    for e in examples {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

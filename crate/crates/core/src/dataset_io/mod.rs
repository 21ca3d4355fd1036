//! Dataset JSON files: loading with validation, canonical saving, statistics, folds and
//! conversion from the published annotation layout.
//!
//! On-disk layout:
//!
//! ```json
//! {"images": [
//! {"id": 1, "file_name": "1.png", "width": 640, "height": 480, "style": "single-line",
//!  "entities": [{"id": 0, "bbox": [x1, y1, x2, y2], "category": "mol"}],
//!  "reactions": [{"reactants": [0], "conditions": [], "products": [1]}]}
//! ]}
//! ```

pub mod convert;
mod split;
mod stats;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use split::{split_folds, FoldAssignment, SplitError};
pub use stats::{stats, DatasetStats, StyleStats};

use crate::schema::{validate_dataset, Dataset, DiagramRecord, Violation};

/// Every violation found in a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid dataset: {0}")]
    Validation(ValidationReport),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

/// Parse and validate a dataset document.
pub fn from_json_str(text: &str) -> Result<Dataset, DatasetError> {
    let dataset: Dataset = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        return Err(DatasetError::Validation(ValidationReport { violations }));
    }
    Ok(dataset)
}

pub fn load(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    from_json_str(&text)
}

/// Canonical text: one compact record per line, keys in declaration order,
/// floats in shortest round-trip form.
pub fn to_json_string(dataset: &Dataset) -> Result<String, DatasetError> {
    records_to_json(&dataset.records)
}

fn records_to_json(records: &[DiagramRecord]) -> Result<String, DatasetError> {
    if records.is_empty() {
        return Ok("{\"images\": []}\n".to_owned());
    }
    let mut out = String::from("{\"images\": [\n");
    for (i, r) in records.iter().enumerate() {
        out.push_str(&serde_json::to_string(r)?);
        out.push_str(if i + 1 < records.len() { ",\n" } else { "\n" });
    }
    out.push_str("]}\n");
    Ok(out)
}

pub fn save(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let text = to_json_string(dataset)?;
    write_atomic(path.as_ref(), text.as_bytes())
}

/// Write to a temporary file beside `path`, then rename over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DatasetError::io(path, e))?;
    tmp.write_all(bytes)
        .map_err(|e| DatasetError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| DatasetError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| DatasetError::io(path, e.error))?;
    Ok(())
}

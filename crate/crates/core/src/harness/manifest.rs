//! JSONL dataset manifests: one `{"id", "image", "label"}` object per line.
//! Image paths are relative to the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::LabeledSample;
use crate::image::{CropImage, ImageError};
use crate::screening::canonicalize;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: empty label for id {id:?}")]
    EmptyLabel { line: usize, id: String },
    #[error("line {line}: image not found: {path}")]
    MissingImage { line: usize, path: PathBuf },
    #[error("line {line}: {source}")]
    Image {
        line: usize,
        #[source]
        source: ImageError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestLine {
    pub id: String,
    pub image: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub source_id: String,
    pub image_path: PathBuf,
    /// Canonicalized under the manifest's case rule.
    pub ground_truth: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub dataset_name: String,
    pub case_insensitive: bool,
    pub entries: Vec<ManifestEntry>,
}

/// Parses and validates a manifest. The dataset name is the file stem.
pub fn load_manifest(path: &Path, case_insensitive: bool) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: ManifestLine = serde_json::from_str(raw).map_err(|e| ManifestError::ParseError {
            line,
            message: e.to_string(),
        })?;
        if !seen.insert(parsed.id.clone()) {
            return Err(ManifestError::DuplicateId { line, id: parsed.id });
        }
        let label = canonicalize(&parsed.label, case_insensitive);
        if label.char_length == 0 {
            return Err(ManifestError::EmptyLabel { line, id: parsed.id });
        }
        let image_path = base.join(&parsed.image);
        if !image_path.is_file() {
            return Err(ManifestError::MissingImage { line, path: image_path });
        }
        entries.push(ManifestEntry {
            source_id: parsed.id,
            image_path,
            ground_truth: label.text,
            line,
        });
    }
    Ok(Manifest {
        dataset_name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
        case_insensitive,
        entries,
    })
}

impl Manifest {
    /// Decodes every image.
    pub fn load_samples(&self) -> Result<Vec<LabeledSample>, ManifestError> {
        self.entries
            .iter()
            .map(|e| {
                let image = CropImage::load(&e.image_path, &e.source_id)
                    .map_err(|source| ManifestError::Image { line: e.line, source })?;
                Ok(LabeledSample {
                    source_id: e.source_id.clone(),
                    image,
                    ground_truth: e.ground_truth.clone(),
                })
            })
            .collect()
    }
}

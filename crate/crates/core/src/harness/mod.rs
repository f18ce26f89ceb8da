//! Operational shell: config and manifest loading, synthetic corpora,
//! report emission, and the command implementations behind the CLI.

pub mod commands;
pub mod config;
mod font;
pub mod manifest;
pub mod report;
pub mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::evaluation::EvalError;
use crate::gateway::GatewayError;
use crate::image::ImageError;

pub use commands::{cmd_ablate, cmd_baseline, cmd_run, cmd_sweep, cmd_synth, CommandOutcome, Overrides, SweepMode};
pub use config::{BackendConfig, RunConfig};
pub use manifest::{load_manifest, Manifest, ManifestEntry, ManifestError};
pub use synth::{SynthCorpus, SynthSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{0}")]
    Output(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

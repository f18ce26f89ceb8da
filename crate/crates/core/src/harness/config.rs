//! TOML run configuration. One file holds the whole deployment contract:
//! view protocol, screening parameters, operating-point family, and backend.
//!
//! ```toml
//! output_dir = "results"
//! parallelism = 4
//! ablation = "full"          # full | no_structural | no_consensus | always_accept
//! cache = true
//! delta = 2.0
//! heldout_fraction = 0.2
//! default_m = 3
//!
//! [protocol]
//! k_views = 5
//! seed = 7
//! case_insensitive = true
//!
//! [length_bound]
//! alpha = 2.0
//!
//! [[operating_points]]
//! m = 3
//! tau = 0.5
//! kappa = 0.4
//! k_min = 3
//!
//! [backend]
//! kind = "scripted"          # or "http" with url, model, timeout_ms, retries, backoff_ms
//! spec = "scripted.json"
//! ```
//!
//! Relative paths resolve against the config file's directory. The
//! `GRC_BACKEND_URL` environment variable overrides an HTTP backend's url.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::controller::{default_family, validate_family, Ablation, OperatingPoint, DEFAULT_M};
use crate::evaluation::EvalSettings;
use crate::gateway::{Gateway, Generator, HttpBackendConfig, HttpGenerator, ScriptedGenerator, ScriptedGeneratorSpec};
use crate::protocol::ProtocolConfig;
use crate::screening::LengthBoundParams;

pub const BACKEND_URL_ENV: &str = "GRC_BACKEND_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Http(HttpBackendConfig),
    Scripted { spec: PathBuf },
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_parallelism() -> usize {
    1
}
fn default_ablation() -> Ablation {
    Ablation::Full
}
fn default_true() -> bool {
    true
}
fn default_delta() -> f64 {
    2.0
}
fn default_heldout() -> f64 {
    0.2
}
fn default_m() -> u32 {
    DEFAULT_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub length_bound: LengthBoundParams,
    #[serde(default = "default_family")]
    pub operating_points: Vec<OperatingPoint>,
    pub backend: BackendConfig,
    #[serde(default = "default_ablation")]
    pub ablation: Ablation,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_true")]
    pub cache: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_heldout")]
    pub heldout_fraction: f64,
    #[serde(default = "default_m")]
    pub default_m: u32,
}

impl RunConfig {
    /// A scripted-backend config with every other setting at its default.
    pub fn scripted(spec: impl Into<PathBuf>) -> Self {
        Self {
            protocol: ProtocolConfig::default(),
            length_bound: LengthBoundParams::default(),
            operating_points: default_family(),
            backend: BackendConfig::Scripted { spec: spec.into() },
            ablation: default_ablation(),
            output_dir: default_output_dir(),
            parallelism: default_parallelism(),
            cache: true,
            delta: default_delta(),
            heldout_fraction: default_heldout(),
            default_m: DEFAULT_M,
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.resolve_paths(base_dir);
        if let Ok(url) = std::env::var(BACKEND_URL_ENV) {
            if let BackendConfig::Http(http) = &mut cfg.backend {
                http.url = url;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|message| HarnessError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    fn resolve_paths(&mut self, base: &Path) {
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
        if let BackendConfig::Scripted { spec } = &mut self.backend {
            if spec.is_relative() {
                *spec = base.join(&*spec);
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.protocol.validate().map_err(|e| e.to_string())?;
        self.length_bound.validate().map_err(|e| e.to_string())?;
        validate_family(&self.operating_points, self.protocol.k_views).map_err(|e| e.to_string())?;
        if !self.operating_points.iter().any(|p| p.m == self.default_m) {
            return Err(format!("default_m={} is not in operating_points", self.default_m));
        }
        if self.parallelism < 1 {
            return Err("parallelism must be at least 1".into());
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(format!("delta {} must be a finite non-negative number", self.delta));
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            return Err(format!("heldout_fraction {} must lie in (0, 1)", self.heldout_fraction));
        }
        Ok(())
    }

    pub fn build_generator(&self) -> Result<Arc<dyn Generator>, HarnessError> {
        match &self.backend {
            BackendConfig::Http(http) => Ok(Arc::new(HttpGenerator::new(http.clone())?)),
            BackendConfig::Scripted { spec } => {
                let text = std::fs::read_to_string(spec).map_err(|e| HarnessError::io(spec, e))?;
                let parsed: ScriptedGeneratorSpec = serde_json::from_str(&text).map_err(|e| HarnessError::Config {
                    path: spec.clone(),
                    message: e.to_string(),
                })?;
                Ok(Arc::new(ScriptedGenerator::new(parsed)?))
            }
        }
    }

    pub fn build_gateway(&self) -> Result<Gateway, HarnessError> {
        Ok(Gateway::new(self.build_generator()?, self.cache))
    }

    pub fn eval_settings(&self, dataset_name: &str) -> EvalSettings {
        EvalSettings {
            dataset_name: dataset_name.to_string(),
            protocol: self.protocol.clone(),
            length_bound: self.length_bound.clone(),
            delta: self.delta,
            parallelism: self.parallelism,
        }
    }
}

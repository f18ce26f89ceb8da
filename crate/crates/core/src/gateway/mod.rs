//! Black-box access to the frozen generator.
//!
//! Everything downstream sees only [`GeneratorReply`] values: the decoded
//! text and, when the backend reports it, the mean token log-probability.

mod cache;
pub mod http;
pub mod scripted;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::CropImage;
use crate::protocol::View;

pub use cache::Gateway;
pub use http::{HttpBackendConfig, HttpGenerator};
pub use scripted::{ConfidenceModel, ScriptedGenerator, ScriptedGeneratorSpec};

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: u32, message: String },
    #[error("malformed backend reply: {0}")]
    MalformedReply(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorQuery<'a> {
    pub image: &'a CropImage,
    pub prompt: &'a str,
    pub view_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorReply {
    pub text: String,
    /// Natural-log probability averaged over generated tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_token_logprob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

impl GeneratorReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            mean_token_logprob: None,
            latency_ms: None,
        }
    }
}

/// A frozen generator under a fixed prompt and decoding setup.
pub trait Generator: Send + Sync {
    /// Stable identity string recorded in run metadata and used as a cache key.
    fn identity(&self) -> String;

    fn generate(&self, query: &GeneratorQuery<'_>) -> Result<GeneratorReply, GatewayError>;
}

impl<G: Generator + ?Sized> Generator for Arc<G> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn generate(&self, query: &GeneratorQuery<'_>) -> Result<GeneratorReply, GatewayError> {
        (**self).generate(query)
    }
}

/// One view's query result.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewOutcome {
    pub view_index: u32,
    pub reply: Result<GeneratorReply, GatewayError>,
}

/// Queries every view with the same prompt. Failures stay per-view; the
/// result is in view-index order whatever the completion order.
pub fn query_all_views(gateway: &Gateway, views: &[View], prompt: &str) -> Vec<ViewOutcome> {
    views
        .par_iter()
        .map(|view| ViewOutcome {
            view_index: view.index,
            reply: gateway.query(&GeneratorQuery {
                image: &view.image,
                prompt,
                view_index: view.index,
            }),
        })
        .collect()
}

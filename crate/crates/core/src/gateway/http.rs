//! JSON-over-HTTP adapter.
//!
//! Request: `POST <url>` with body `{"image_b64": "<base64 PNG>", "prompt": "..."}`.
//! Response: `{"text": "...", "mean_token_logprob": <number, optional>}`.
//!
//! Transport errors and 5xx statuses are retried with exponential backoff;
//! 4xx statuses fail immediately.

use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{GatewayError, Generator, GeneratorQuery, GeneratorReply};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpBackendConfig {
    pub url: String,
    /// Free-form backend label (model, decoding setup) recorded in run metadata.
    pub model: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            model: String::new(),
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 200,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    image_b64: String,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct WireReply {
    text: String,
    #[serde(default)]
    mean_token_logprob: Option<f64>,
}

pub struct HttpGenerator {
    config: HttpBackendConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl HttpGenerator {
    pub fn new(config: HttpBackendConfig) -> Result<Self, GatewayError> {
        if config.url.is_empty() {
            return Err(GatewayError::InvalidConfig("http backend needs a url".into()));
        }
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        Ok(Self { config, agent })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<GeneratorReply, Attempt> {
        let started = Instant::now();
        let response = match self.agent.post(&self.config.url).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) if code >= 500 => {
                return Err(Attempt::Retry(format!("HTTP {code}")));
            }
            Err(ureq::Error::Status(code, r)) => {
                let detail = r.into_string().unwrap_or_default();
                return Err(Attempt::Fatal(GatewayError::BackendUnavailable {
                    attempts: 1,
                    message: format!("HTTP {code}: {detail}"),
                }));
            }
            Err(ureq::Error::Transport(t)) => return Err(Attempt::Retry(t.to_string())),
        };
        let raw = response
            .into_string()
            .map_err(|e| Attempt::Retry(format!("reading body: {e}")))?;
        let wire: WireReply = serde_json::from_str(&raw)
            .map_err(|e| Attempt::Fatal(GatewayError::MalformedReply(format!("{e}: {raw}"))))?;
        if let Some(lp) = wire.mean_token_logprob {
            if !lp.is_finite() {
                return Err(Attempt::Fatal(GatewayError::MalformedReply(format!(
                    "mean_token_logprob {lp} is not finite"
                ))));
            }
        }
        Ok(GeneratorReply {
            text: wire.text,
            mean_token_logprob: wire.mean_token_logprob,
            latency_ms: Some(started.elapsed().as_secs_f64() * 1000.0),
        })
    }
}

impl Generator for HttpGenerator {
    fn identity(&self) -> String {
        if self.config.model.is_empty() {
            format!("http:{}", self.config.url)
        } else {
            format!("http:{}#{}", self.config.url, self.config.model)
        }
    }

    fn generate(&self, q: &GeneratorQuery<'_>) -> Result<GeneratorReply, GatewayError> {
        let body = serde_json::to_value(WireRequest {
            image_b64: base64::engine::general_purpose::STANDARD.encode(q.image.to_png()),
            prompt: q.prompt,
        })
        .expect("request serializes");
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (attempt - 1)));
            }
            match self.attempt(&body) {
                Ok(reply) => return Ok(reply),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(GatewayError::BackendUnavailable {
            attempts: self.config.retries + 1,
            message: last,
        })
    }
}

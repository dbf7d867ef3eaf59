//! Blocking client for an external embedding service.
//!
//! Protocol: `POST {base_url}/v1/encode` with `{"texts": [...]}`; the service
//! answers `{"vectors": [[...], ...], "dim": D}` with one vector per text, in
//! request order.

use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::EmbeddingVector;

use super::Encoder;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub batch_size: usize,
    /// Extra attempts after the first failed one.
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub initial_backoff: Duration,
    /// Expected dimension; learned from the first response when `None`.
    pub dim: Option<usize>,
}

impl RemoteConfig {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
    pub const DEFAULT_BATCH: usize = 32;
    pub const DEFAULT_RETRIES: u32 = 2;
    pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(250);

    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout: Self::DEFAULT_TIMEOUT,
            batch_size: Self::DEFAULT_BATCH,
            retries: Self::DEFAULT_RETRIES,
            initial_backoff: Self::DEFAULT_BACKOFF,
            dim: None,
        }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/encode", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Serialize)]
struct EncodeRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EncodeResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

enum Failure {
    Transient(String),
    Fatal(Error),
}

#[derive(Debug)]
pub struct RemoteEncoder {
    config: RemoteConfig,
    agent: ureq::Agent,
    dim: OnceLock<usize>,
}

impl RemoteEncoder {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let dim = OnceLock::new();
        if let Some(d) = config.dim {
            let _ = dim.set(d);
        }
        Ok(Self { config, agent, dim })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn post_once(&self, batch: &[&str]) -> std::result::Result<EncodeResponse, Failure> {
        let resp = self
            .agent
            .post(&self.config.endpoint())
            .header("Content-Type", "application/json")
            .send_json(EncodeRequest { texts: batch });
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Err(Failure::Transient(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status != 200 {
            let msg = format!("HTTP {status} from {}", self.config.endpoint());
            return Err(if status == 429 || status >= 500 {
                Failure::Transient(msg)
            } else {
                Failure::Fatal(Error::RemoteUnavailable(msg))
            });
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| {
            Failure::Fatal(Error::RemoteUnavailable(format!("malformed response body: {e}")))
        })
    }

    fn post_with_retry(&self, batch: &[&str]) -> Result<EncodeResponse> {
        let mut backoff = self.config.initial_backoff;
        let mut attempt = 0;
        loop {
            match self.post_once(batch) {
                Ok(r) => return Ok(r),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(msg)) => {
                    if attempt >= self.config.retries {
                        return Err(Error::RemoteUnavailable(format!(
                            "{msg} (after {} attempts)",
                            attempt + 1
                        )));
                    }
                }
            }
            attempt += 1;
            thread::sleep(backoff);
            backoff *= 2;
        }
    }

    fn check(&self, batch_len: usize, resp: EncodeResponse) -> Result<Vec<EmbeddingVector>> {
        if resp.vectors.len() != batch_len {
            return Err(Error::RemoteUnavailable(format!(
                "malformed response: {} vectors for {batch_len} texts",
                resp.vectors.len()
            )));
        }
        let expected = *self.dim.get_or_init(|| resp.dim);
        if resp.dim != expected {
            return Err(Error::DimMismatch {
                expected,
                got: resp.dim,
            });
        }
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != expected {
                    return Err(Error::DimMismatch {
                        expected,
                        got: v.len(),
                    });
                }
                EmbeddingVector::new(v)
                    .map_err(|e| Error::RemoteUnavailable(format!("malformed vector: {e}")))
            })
            .collect()
    }
}

impl Encoder for RemoteEncoder {
    fn dim(&self) -> Option<usize> {
        self.dim.get().copied()
    }

    fn encode(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() || texts.iter().any(|t| t.trim().is_empty()) {
            return Err(Error::EmptyInput);
        }
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.config.batch_size) {
            let resp = self.post_with_retry(batch)?;
            out.extend(self.check(batch.len(), resp)?);
        }
        Ok(out)
    }
}

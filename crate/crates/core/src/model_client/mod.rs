//! Generation endpoints: an HTTP chat-completions client and a scripted mock.
//!
//! Every client returns completions already reduced to a single SQL
//! statement by [`extract_sql`]; the untouched text is kept in `raw`.

mod extract;
mod http;
mod mock;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::extract_sql;
pub use http::{HttpClient, HttpConfig, API_KEY_ENV};
pub use mock::{MockClient, MockEntry, RecordingClient};

pub const DEFAULT_MAX_TOKENS: u32 = 512;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("endpoint {endpoint} unreachable after {attempts} attempt(s): {message}")]
    EndpointUnreachable { endpoint: String, attempts: u32, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("authentication rejected by {endpoint} (HTTP {status})")]
    AuthError { endpoint: String, status: u16 },
    #[error("request rejected by {endpoint} (HTTP {status}): {message}")]
    Rejected { endpoint: String, status: u16, message: String },
    #[error("mock script has no response left for prompt: {prompt_excerpt}")]
    MockExhausted { prompt_excerpt: String },
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("{path}:{line}: bad mock script entry: {message}")]
    Script { path: PathBuf, line: usize, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("cannot interpret endpoint {0:?} as a URL, mock:<path>, or script file")]
    UnknownEndpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub n: usize,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            temperature: 0.0,
            n: 1,
            max_tokens: DEFAULT_MAX_TOKENS,
            stop_sequences: vec![";".into(), "\n\n".into()],
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn check(&self) -> Result<(), ClientError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ClientError::InvalidRequest(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.n == 0 {
            return Err(ClientError::InvalidRequest("n must be at least 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(ClientError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    /// Extracted SQL, exactly `request.n` entries.
    pub completions: Vec<String>,
    /// Completion text as returned by the endpoint.
    pub raw: Vec<String>,
    pub model_name: String,
    pub usage: Usage,
}

pub trait ModelClient: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ClientError>;

    /// Label used in logs and reports.
    fn name(&self) -> &str;
}

impl<C: ModelClient + ?Sized> ModelClient for Box<C> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ClientError> {
        (**self).generate(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<C: ModelClient + ?Sized> ModelClient for std::sync::Arc<C> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ClientError> {
        (**self).generate(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Open an endpoint from its textual form: `mock:<path>`, an `http(s)://`
/// URL, or the path of an existing mock script.
pub fn open_endpoint(spec: &str, http: &HttpConfig) -> Result<Box<dyn ModelClient>, ClientError> {
    if let Some(path) = spec.strip_prefix("mock:") {
        return Ok(Box::new(MockClient::from_path(Path::new(path))?));
    }
    if spec.starts_with("http://") || spec.starts_with("https://") {
        let cfg = HttpConfig { url: spec.to_string(), ..http.clone() };
        return Ok(Box::new(HttpClient::new(cfg)?));
    }
    if Path::new(spec).is_file() {
        return Ok(Box::new(MockClient::from_path(Path::new(spec))?));
    }
    Err(ClientError::UnknownEndpoint(spec.to_string()))
}

pub(crate) fn excerpt(text: &str) -> String {
    const MAX: usize = 120;
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= MAX {
        flat
    } else {
        let cut: String = flat.chars().take(MAX).collect();
        format!("{cut}...")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_defaults_and_checks() {
        let r = GenerationRequest::new("p");
        assert_eq!(r.max_tokens, 512);
        assert_eq!(r.stop_sequences, [";", "\n\n"]);
        assert!(r.check().is_ok());
        assert!(r.clone().with_n(0).check().is_err());
        assert!(r.clone().with_temperature(-0.1).check().is_err());
        assert!(r.with_temperature(f64::NAN).check().is_err());
    }

    #[test]
    fn unknown_endpoint_spec() {
        let err = open_endpoint("nowhere", &HttpConfig::default()).err().unwrap();
        assert!(matches!(err, ClientError::UnknownEndpoint(_)));
    }
}

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{excerpt, extract_sql, ClientError, GenerationRequest, GenerationResponse, ModelClient, Usage};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "SQLFORGE_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Full chat-completions URL.
    pub url: String,
    pub model: String,
    pub api_key_env: String,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub request_timeout: Duration,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            url: String::new(),
            model: "default".into(),
            api_key_env: API_KEY_ENV.into(),
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            request_timeout: Duration::from_secs(120),
            max_in_flight: 4,
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    model: Option<String>,
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    #[serde(default)]
    message: Option<WireMessage>,
    #[serde(default)]
    text: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum Attempt {
    Done(WireResponse),
    Retry(String),
    Fail(ClientError),
}

pub struct HttpClient {
    cfg: HttpConfig,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
    slots: Semaphore,
}

impl HttpClient {
    pub fn new(cfg: HttpConfig) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.request_timeout)
            .build()
            .map_err(|e| ClientError::InvalidRequest(e.to_string()))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        let slots = Semaphore::new(cfg.max_in_flight);
        Ok(HttpClient { cfg, api_key, http, slots })
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let _permit = self.slots.acquire();
        let mut req = self.http.post(&self.cfg.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Attempt::Fail(ClientError::AuthError { endpoint: self.cfg.url.clone(), status: status.as_u16() });
        }
        if status.is_server_error() || status.as_u16() == 429 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if !status.is_success() {
            return Attempt::Fail(ClientError::Rejected {
                endpoint: self.cfg.url.clone(),
                status: status.as_u16(),
                message: excerpt(&text),
            });
        }
        match serde_json::from_str(&text) {
            Ok(parsed) => Attempt::Done(parsed),
            Err(e) => Attempt::Fail(ClientError::MalformedResponse(format!("{e}: {}", excerpt(&text)))),
        }
    }

    fn post_with_retry(&self, body: &serde_json::Value) -> Result<WireResponse, ClientError> {
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                let wait = self.cfg.initial_backoff * 2u32.saturating_pow(attempt - 1);
                tracing::warn!(endpoint = %self.cfg.url, attempt, ?wait, error = %last, "retrying generation request");
                thread::sleep(wait);
            }
            match self.attempt(body) {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(msg) => last = msg,
            }
        }
        Err(ClientError::EndpointUnreachable {
            endpoint: self.cfg.url.clone(),
            attempts: self.cfg.max_retries + 1,
            message: last,
        })
    }
}

impl ModelClient for HttpClient {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ClientError> {
        request.check()?;
        let mut raw: Vec<String> = Vec::with_capacity(request.n);
        let mut usage = Usage::default();
        let mut model_name = self.cfg.model.clone();
        // Some servers ignore `n`; top up with further requests.
        while raw.len() < request.n {
            let body = json!({
                "model": self.cfg.model,
                "messages": [{"role": "user", "content": request.prompt}],
                "temperature": request.temperature,
                "n": request.n - raw.len(),
                "max_tokens": request.max_tokens,
                "stop": request.stop_sequences,
            });
            tracing::debug!(endpoint = %self.cfg.url, n = request.n - raw.len(), "chat completion request");
            let wire = self.post_with_retry(&body)?;
            if wire.choices.is_empty() {
                return Err(ClientError::MalformedResponse("response has no choices".into()));
            }
            for choice in wire.choices {
                let text = choice
                    .message
                    .and_then(|m| m.content)
                    .or(choice.text)
                    .ok_or_else(|| ClientError::MalformedResponse("choice without content".into()))?;
                if raw.len() < request.n {
                    raw.push(text);
                }
            }
            if let Some(m) = wire.model {
                model_name = m;
            }
            let u = wire.usage.unwrap_or_default();
            usage.prompt_tokens += u.prompt_tokens;
            usage.completion_tokens += u.completion_tokens;
        }
        Ok(GenerationResponse { completions: raw.iter().map(|r| extract_sql(r)).collect(), raw, model_name, usage })
    }

    fn name(&self) -> &str {
        &self.cfg.url
    }
}

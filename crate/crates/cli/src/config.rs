//! TOML config file. Every key is optional; command-line flags win.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use sqlforge_core::model_client::HttpConfig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus_root: Option<PathBuf>,
    pub variant_root: Option<PathBuf>,
    pub exec_timeout_secs: Option<u64>,
    pub n_candidates: Option<usize>,
    pub temperature: Option<f64>,
    pub max_iters: Option<usize>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub log_level: Option<String>,
    /// Endpoint used by `mine`.
    pub endpoint: Option<EndpointConfig>,
    pub generator: Option<EndpointConfig>,
    pub debugger: Option<EndpointConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// `http(s)://` URL, `mock:<path>`, or a mock script path.
    pub url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub max_retries: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub request_timeout_secs: Option<u64>,
}

impl EndpointConfig {
    pub fn http_config(&self) -> HttpConfig {
        let d = HttpConfig::default();
        HttpConfig {
            url: self.url.clone().unwrap_or_default(),
            model: self.model.clone().unwrap_or(d.model),
            api_key_env: self.api_key_env.clone().unwrap_or(d.api_key_env),
            max_retries: self.max_retries.unwrap_or(d.max_retries),
            max_in_flight: self.max_in_flight.unwrap_or(d.max_in_flight),
            request_timeout: self.request_timeout_secs.map(Duration::from_secs).unwrap_or(d.request_timeout),
            initial_backoff: d.initial_backoff,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: FileConfig = toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        cfg.check().map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        if self.exec_timeout_secs == Some(0) {
            return Err("exec_timeout_secs must be at least 1".into());
        }
        if self.n_candidates == Some(0) {
            return Err("n_candidates must be at least 1".into());
        }
        if self.max_iters == Some(0) {
            return Err("max_iters must be at least 1".into());
        }
        if self.jobs == Some(0) {
            return Err("jobs must be at least 1".into());
        }
        if let Some(t) = self.temperature {
            check_temperature(t)?;
        }
        for (name, ep) in [("endpoint", &self.endpoint), ("generator", &self.generator), ("debugger", &self.debugger)] {
            if let Some(ep) = ep {
                if ep.max_in_flight == Some(0) {
                    return Err(format!("{name}.max_in_flight must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

pub fn check_temperature(t: f64) -> Result<(), String> {
    if t.is_finite() && (0.0..=2.0).contains(&t) {
        Ok(())
    } else {
        Err(format!("temperature {t} must be within [0, 2]"))
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8)
}

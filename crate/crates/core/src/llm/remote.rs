//! Chat-completion client for a hosted language model.

use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{build_messages, parse_amount, BackendSession, DecisionBackend, DecisionContext, LlmError, LlmSuggestion};

pub const ENV_ENDPOINT: &str = "TAXSIM_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "TAXSIM_LLM_API_KEY";
pub const ENV_MODEL: &str = "TAXSIM_LLM_MODEL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{endpoint}/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Never echoed into config files.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    /// Global minimum spacing between requests, across all sessions.
    pub min_interval_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key: None,
            temperature: 0.7,
            timeout_secs: 60.0,
            max_attempts: 3,
            backoff_ms: 500,
            min_interval_ms: 0,
        }
    }
}

impl RemoteConfig {
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| LlmError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| LlmError::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(Self { endpoint, model, api_key: std::env::var(ENV_API_KEY).ok(), ..Self::default() })
    }
}

/// Hands out request slots no closer than the configured interval.
#[derive(Debug)]
struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn wait(&self) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

#[derive(Debug)]
struct Inner {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    limiter: RateLimiter,
}

#[derive(Debug, Clone)]
pub struct RemoteBackend {
    inner: Arc<Inner>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, LlmError> {
        if config.endpoint.is_empty() {
            return Err(LlmError::Config("remote endpoint is empty".into()));
        }
        if config.max_attempts == 0 {
            return Err(LlmError::Config("max_attempts must be at least 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let limiter = RateLimiter { interval: Duration::from_millis(config.min_interval_ms), next: Mutex::new(None) };
        Ok(Self { inner: Arc::new(Inner { config, client, limiter }) })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.inner.config.endpoint.trim_end_matches('/'))
    }

    fn request_once(&self, body: &Value) -> Result<String, String> {
        self.inner.limiter.wait();
        let mut request = self.inner.client.post(self.url()).json(body);
        if let Some(key) = &self.inner.config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| e.to_string())?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()));
        }
        let value: Value = response.json().map_err(|e| e.to_string())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }

    /// Sends one decision prompt, retrying transport and parse failures
    /// with exponential backoff.
    pub fn complete(&self, ctx: &DecisionContext) -> Result<LlmSuggestion, LlmError> {
        let prompt = build_messages(ctx);
        let config = &self.inner.config;
        let body = json!({
            "model": config.model,
            "temperature": config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        });
        let started = Instant::now();
        let mut last = String::new();
        for attempt in 0..config.max_attempts {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16))));
            }
            match self.request_once(&body) {
                Ok(text) => match parse_amount(&text) {
                    Ok(amount) => {
                        return Ok(LlmSuggestion {
                            amount,
                            raw_text: text,
                            latency_ms: started.elapsed().as_millis() as u64,
                            backend_id: format!("remote:{}", config.model),
                        })
                    }
                    Err(e) => last = e.to_string(),
                },
                Err(e) => last = e,
            }
            log::warn!("remote backend attempt {} failed: {last}", attempt + 1);
        }
        Err(LlmError::Backend { attempts: config.max_attempts, message: last })
    }
}

struct RemoteSession {
    backend: RemoteBackend,
}

impl BackendSession for RemoteSession {
    fn suggest(&mut self, ctx: &DecisionContext) -> Result<LlmSuggestion, LlmError> {
        self.backend.complete(ctx)
    }
}

impl DecisionBackend for RemoteBackend {
    fn id(&self) -> String {
        format!("remote:{}", self.inner.config.model)
    }

    fn open_session(&self, _agent_id: usize, _seed: u64) -> Box<dyn BackendSession> {
        Box::new(RemoteSession { backend: self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_limiter_spaces_requests() {
        let limiter = RateLimiter { interval: Duration::from_millis(20), next: Mutex::new(None) };
        let start = Instant::now();
        for _ in 0..4 {
            limiter.wait();
        }
        assert!(start.elapsed() >= Duration::from_millis(60));
    }

    #[test]
    fn empty_endpoint_rejected() {
        assert!(RemoteBackend::new(RemoteConfig::default()).is_err());
    }
}

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{ChatRequest, LlmBackend};
use super::error::BackendError;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub requests_per_minute: f64,
    pub temperature: f64,
    /// First retry waits this long; each further retry doubles it.
    pub backoff_base_secs: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            requests_per_minute: 60.0,
            temperature: 0.0,
            backoff_base_secs: 2.0,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.requests_per_minute > 0.0 && self.requests_per_minute.is_finite()) {
            return Err(Error::InvalidConfig("requests_per_minute must be positive".into()));
        }
        if !(self.timeout_secs > 0.0 && self.backoff_base_secs >= 0.0) {
            return Err(Error::InvalidConfig("timeout must be positive and backoff non-negative".into()));
        }
        Ok(())
    }

    pub fn backoff(&self, retry: u32) -> Duration {
        Duration::from_secs_f64(self.backoff_base_secs * 2f64.powi(retry as i32))
    }
}

/// Runs `op` up to `max_retries + 1` times, sleeping `backoff(i)` before
/// retry `i`. Only retryable errors are retried.
pub fn with_retry<T>(
    max_retries: u32,
    backoff: impl Fn(u32) -> Duration,
    mut op: impl FnMut() -> Result<T, BackendError>,
) -> Result<T, BackendError> {
    let mut attempt = 0;
    loop {
        match op() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && attempt < max_retries => {
                thread::sleep(backoff(attempt));
                attempt += 1;
            }
            Err(e) if e.is_retryable() && max_retries > 0 => {
                return Err(BackendError::RetriesExhausted {
                    attempts: attempt + 1,
                    last: Box::new(e),
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// OpenAI-style chat-completion endpoint over HTTP.
pub struct HttpBackend {
    config: BackendConfig,
    api_key: String,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

fn classify_status(status: u16, body: String) -> BackendError {
    match status {
        401 | 403 => BackendError::Auth { status },
        408 | 409 | 429 | 500..=599 => BackendError::Transient {
            status: Some(status),
            message: body,
        },
        _ => BackendError::Fatal(format!("status {status}: {body}")),
    }
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: BackendConfig) -> Result<Self> {
        let key = std::env::var(&config.api_key_env).map_err(|_| {
            Error::InvalidConfig(format!("environment variable {} is not set", config.api_key_env))
        })?;
        Self::with_key(config, key)
    }

    pub fn with_key(config: BackendConfig, api_key: String) -> Result<Self> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            config,
            api_key,
            agent,
            last_request: Mutex::new(None),
        })
    }

    fn throttle(&self) {
        let gap = Duration::from_secs_f64(60.0 / self.config.requests_per_minute);
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < gap {
                thread::sleep(gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.throttle();
        let payload = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
        });
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        let mut resp = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&payload)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => BackendError::Timeout(timeout),
                ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::BodyStalled => {
                    BackendError::Transient {
                        status: None,
                        message: e.to_string(),
                    }
                }
                other => BackendError::Fatal(other.to_string()),
            })?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(classify_status(status, body));
        }
        let parsed: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Fatal(format!("malformed completion: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Fatal("completion has no choices".into()))
    }
}

impl LlmBackend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        with_retry(self.config.max_retries, |i| self.config.backoff(i), || self.attempt(request))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn retries_transient_then_succeeds() {
        let calls = Cell::new(0);
        let out = with_retry(3, |_| Duration::ZERO, || {
            calls.set(calls.get() + 1);
            if calls.get() == 1 {
                Err(BackendError::Transient {
                    status: Some(429),
                    message: String::new(),
                })
            } else {
                Ok("ok")
            }
        });
        assert_eq!(out.unwrap(), "ok");
        assert_eq!(calls.get(), 2);
    }

    #[test]
    fn auth_is_not_retried() {
        let calls = Cell::new(0);
        let out: Result<(), _> = with_retry(3, |_| Duration::ZERO, || {
            calls.set(calls.get() + 1);
            Err(BackendError::Auth { status: 401 })
        });
        assert_eq!(out.unwrap_err(), BackendError::Auth { status: 401 });
        assert_eq!(calls.get(), 1);
    }

    #[test]
    fn exhaustion_reports_attempts() {
        let out: Result<(), _> = with_retry(2, |_| Duration::ZERO, || Err(BackendError::Timeout(Duration::from_secs(1))));
        match out.unwrap_err() {
            BackendError::RetriesExhausted { attempts, .. } => assert_eq!(attempts, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn backoff_doubles() {
        let c = BackendConfig::default();
        assert_eq!(c.backoff(0), Duration::from_secs(2));
        assert_eq!(c.backoff(2), Duration::from_secs(8));
    }
}

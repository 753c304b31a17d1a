//! OpenAI-compatible chat-completion client.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatRequest, LlmError, LlmProvider};

pub const ENV_ENDPOINT: &str = "HANDMORPH_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "HANDMORPH_LLM_API_KEY";
pub const ENV_MODEL: &str = "HANDMORPH_LLM_MODEL";

static NETWORK_OPS: AtomicUsize = AtomicUsize::new(0);

/// Number of HTTP attempts made by any provider in this process.
pub fn network_ops() -> usize {
    NETWORK_OPS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpConfig {
    pub timeout_s: f64,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            timeout_s: 60.0,
            max_attempts: 3,
            backoff_base_ms: 500,
            max_in_flight: 4,
        }
    }
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().expect("gate poisoned");
        while *n >= self.cap {
            n = self.freed.wait(n).expect("gate poisoned");
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().expect("gate poisoned");
        *n -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpProvider {
    endpoint: String,
    api_key: String,
    model_override: Option<String>,
    config: HttpConfig,
    agent: ureq::Agent,
    gate: Gate,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(LlmError),
}

impl HttpProvider {
    /// Reads endpoint, key and optional model from the environment. Fails
    /// before any network activity when the endpoint or key is missing.
    pub fn from_env(config: HttpConfig) -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| LlmError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let api_key = std::env::var(ENV_API_KEY)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| LlmError::Config(format!("{ENV_API_KEY} is not set")))?;
        let model = std::env::var(ENV_MODEL).ok().filter(|s| !s.trim().is_empty());
        Self::new(endpoint, api_key, model, config)
    }

    pub fn new(
        endpoint: String,
        api_key: String,
        model_override: Option<String>,
        config: HttpConfig,
    ) -> Result<Self, LlmError> {
        if config.max_attempts == 0 || config.max_in_flight == 0 {
            return Err(LlmError::Config("max_attempts and max_in_flight must be >= 1".into()));
        }
        if !(config.timeout_s > 0.0) {
            return Err(LlmError::Config("timeout_s must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpProvider {
            endpoint,
            api_key,
            model_override,
            gate: Gate {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                cap: config.max_in_flight,
            },
            config,
            agent,
        })
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        json!({
            "model": self.model_override.as_deref().unwrap_or(&request.model),
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        NETWORK_OPS.fetch_add(1, Ordering::SeqCst);
        let result = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Timeout(t)) => return Attempt::Retry(format!("timeout ({t})")),
            Err(ureq::Error::Io(e)) => return Attempt::Retry(format!("i/o: {e}")),
            Err(e) => return Attempt::Fatal(LlmError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(t)) => return Attempt::Retry(format!("timeout ({t})")),
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fatal(LlmError::Status { status, body: text });
        }
        match content_of(&text) {
            Some(c) => Attempt::Done(c),
            None => Attempt::Fatal(LlmError::Transport(format!(
                "response has no choices[0].message.content: {text}"
            ))),
        }
    }
}

fn content_of(body: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?
        .as_str()
        .map(str::to_string)
}

impl LlmProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.check()?;
        let body = self.body(request);
        let _slot = self.gate.enter();
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(why) => {
                    log::warn!("{} request attempt {attempt} failed: {why}", request.purpose);
                    last = why;
                    if attempt < self.config.max_attempts {
                        let wait = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                        std::thread::sleep(Duration::from_millis(wait));
                    }
                }
            }
        }
        Err(LlmError::RetriesExhausted {
            attempts: self.config.max_attempts,
            last,
        })
    }
}

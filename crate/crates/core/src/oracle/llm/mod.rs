//! Chat-completion client used as a preference oracle.
//!
//! Requests are cached by content hash, bounded by a shared in-flight window
//! and a sliding-window request budget, and retried with exponential backoff
//! on transient failures.

mod cache;
mod limiter;

pub use cache::{CacheEntry, CacheKey, ResponseCache};
pub use limiter::{Permit, RequestLimiter};

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::parse::{parse_llm_answer, Answer, AnswerMode};
use super::{Choice, OracleError, PairQuery, PreferenceOracle, PromptTemplate, TemplateMode};

pub const DEFAULT_API_KEY_ENV: &str = "CBLI_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub system_prompt: String,
    pub temperature: f64,
    pub top_p: Option<f64>,
    /// Retries after a transport error, 429 or 5xx.
    pub max_transport_retries: u32,
    /// Completions requested before an unparseable answer becomes a failure.
    pub parse_attempts: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
    pub requests_per_minute: Option<usize>,
    /// Length of the rate window; one minute unless overridden.
    pub rate_window_ms: u64,
    pub timeout_secs: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            system_prompt: "You are a helpful assistant.".into(),
            temperature: 1.0,
            top_p: None,
            max_transport_retries: 5,
            parse_attempts: 3,
            backoff_ms: 500,
            max_in_flight: 4,
            requests_per_minute: Some(60),
            rate_window_ms: 60_000,
            timeout_secs: 120,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parsed {
    Choice(Choice),
    Score(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResponse {
    /// Text of the last completion consulted.
    pub raw: String,
    /// Present exactly when parsing succeeded.
    pub parsed: Option<Parsed>,
    /// Completions consulted, cached or not.
    pub attempts: u32,
    /// Whether the last completion came from the cache.
    pub cached: bool,
}

pub struct LlmClient {
    config: LlmConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    cache: ResponseCache,
    limiter: RequestLimiter,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

impl LlmClient {
    pub fn new(config: LlmConfig) -> Result<Self, OracleError> {
        if config.parse_attempts == 0 {
            return Err(OracleError::Config("parse_attempts must be at least 1".into()));
        }
        if !(config.temperature.is_finite() && config.temperature >= 0.0) {
            return Err(OracleError::Config(format!(
                "invalid temperature {}",
                config.temperature
            )));
        }
        let uri: ureq::http::Uri = config
            .endpoint
            .parse()
            .map_err(|e| OracleError::Fatal(format!("bad endpoint `{}`: {e}", config.endpoint)))?;
        if !matches!(uri.scheme_str(), Some("http" | "https")) || uri.host().is_none() {
            return Err(OracleError::Fatal(format!("bad endpoint `{}`: need an http(s) URL", config.endpoint)));
        }
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            tracing::warn!(var = %config.api_key_env, "no API key set; sending unauthenticated requests");
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let cache = ResponseCache::new(config.cache_dir.as_deref())
            .map_err(|e| OracleError::Config(format!("cache directory: {e}")))?;
        let rate = config
            .requests_per_minute
            .map(|n| (n, Duration::from_millis(config.rate_window_ms)));
        let limiter = RequestLimiter::new(config.max_in_flight, rate);
        Ok(Self {
            config,
            api_key,
            agent,
            cache,
            limiter,
        })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// One completion for `prompt`, from the cache when available.
    /// Returns the text and whether it was cached.
    pub fn complete(&self, prompt: &str, repeat: u32, attempt: u32) -> Result<(String, bool), OracleError> {
        let key = CacheKey {
            model: &self.config.model,
            system: &self.config.system_prompt,
            prompt,
            temperature: self.config.temperature,
            top_p: self.config.top_p,
            repeat,
            attempt,
        }
        .digest();
        let lock = self.cache.key_lock(&key);
        let _guard = lock.lock().expect("cache key lock");
        if let Some(raw) = self.cache.get(&key) {
            return Ok((raw, true));
        }
        let raw = self.send_with_retries(prompt)?;
        if let Err(e) = self.cache.put(&key, &raw) {
            tracing::warn!(error = %e, "could not persist cached response");
        }
        Ok((raw, false))
    }

    fn send_with_retries(&self, prompt: &str) -> Result<String, OracleError> {
        let mut retry = 0;
        loop {
            match self.send(prompt) {
                Ok(text) => return Ok(text),
                Err(OracleError::Transient(msg)) if retry < self.config.max_transport_retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << retry.min(16));
                    tracing::debug!(retry, delay_ms = delay, error = %msg, "retrying request");
                    std::thread::sleep(Duration::from_millis(delay));
                    retry += 1;
                }
                Err(OracleError::Transient(msg)) => {
                    return Err(OracleError::QueryFailure(format!(
                        "gave up after {} retries: {msg}",
                        retry
                    )))
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn send(&self, prompt: &str) -> Result<String, OracleError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": self.config.system_prompt},
                {"role": "user", "content": prompt},
            ],
            "temperature": self.config.temperature,
        });
        if let Some(top_p) = self.config.top_p {
            body["top_p"] = json!(top_p);
        }
        let _permit = self.limiter.acquire();
        let mut request = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send(serde_json::to_string(&body).expect("request serializes"))
            .map_err(|e| match e {
                ureq::Error::BadUri(_) | ureq::Error::InvalidProxyUrl => {
                    OracleError::Fatal(format!("bad endpoint: {e}"))
                }
                other => OracleError::Transient(other.to_string()),
            })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| OracleError::Transient(e.to_string()))?;
        match status {
            200..=299 => extract_content(&text),
            401 | 403 => Err(OracleError::Fatal(format!("authentication failed ({status})"))),
            408 | 429 | 500..=599 => Err(OracleError::Transient(format!("status {status}"))),
            _ => Err(OracleError::Fatal(format!("request rejected ({status}): {text}"))),
        }
    }

    fn query(&self, prompt: &str, mode: AnswerMode, repeat: u32) -> Result<OracleResponse, OracleError> {
        let mut last_err = None;
        for attempt in 0..self.config.parse_attempts {
            let (raw, cached) = self.complete(prompt, repeat, attempt)?;
            match parse_llm_answer(&raw, mode) {
                Ok(answer) => {
                    let parsed = match answer {
                        Answer::Choice(c) => Parsed::Choice(c),
                        Answer::Score(s) => Parsed::Score(s),
                    };
                    return Ok(OracleResponse {
                        raw,
                        parsed: Some(parsed),
                        attempts: attempt + 1,
                        cached,
                    });
                }
                Err(e) => {
                    tracing::debug!(attempt, error = %e, "unparseable completion");
                    last_err = Some(e);
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    /// Asks which of two contents the persona prefers.
    pub fn llm_prefer(
        &self,
        template: &PromptTemplate,
        persona: &str,
        content_a: &str,
        content_b: &str,
        repeat: u32,
    ) -> Result<OracleResponse, OracleError> {
        if template.mode != TemplateMode::Pairwise {
            return Err(OracleError::Config(format!(
                "template `{}` is not a pairwise template",
                template.name
            )));
        }
        let prompt = template.fill_pairwise(persona, content_a, content_b)?;
        self.query(&prompt, AnswerMode::Pairwise, repeat)
            .map_err(|e| match e {
                OracleError::Parse(msg) | OracleError::QueryFailure(msg) => OracleError::QueryFailure(format!(
                    "no answer after {} attempts: {msg}",
                    self.config.parse_attempts
                )),
                other => other,
            })
    }

    /// Individual 0-100 score for one content.
    pub fn score_individual(
        &self,
        template: &PromptTemplate,
        persona: &str,
        content: &str,
        repeat: u32,
    ) -> Result<u8, OracleError> {
        if template.mode != TemplateMode::Numeric {
            return Err(OracleError::Config(format!(
                "template `{}` is not a scoring template",
                template.name
            )));
        }
        let prompt = template.fill_numeric(persona, content)?;
        match self.query(&prompt, AnswerMode::Numeric, repeat)?.parsed {
            Some(Parsed::Score(s)) => Ok(s),
            _ => unreachable!("numeric mode yields scores"),
        }
    }
}

fn extract_content(body: &str) -> Result<String, OracleError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| OracleError::Transient(format!("malformed response body: {e}")))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| OracleError::Transient("response has no message content".into()))
}

/// [`PreferenceOracle`] backed by an [`LlmClient`] and a pairwise template.
#[derive(Debug, Clone)]
pub struct LlmOracle {
    client: Arc<LlmClient>,
    template: PromptTemplate,
}

impl LlmOracle {
    pub fn new(client: Arc<LlmClient>, template: PromptTemplate) -> Result<Self, OracleError> {
        if template.mode != TemplateMode::Pairwise {
            return Err(OracleError::Config("LLM oracle needs a pairwise template".into()));
        }
        Ok(Self { client, template })
    }

    pub fn client(&self) -> &LlmClient {
        &self.client
    }
}

impl PreferenceOracle for LlmOracle {
    fn id(&self) -> String {
        format!("llm:{}:{}", self.client.config.model, self.template.name)
    }

    fn prefer(&self, query: &PairQuery<'_>, _rng: &mut dyn RngCore) -> Result<Choice, OracleError> {
        let response = self.client.llm_prefer(
            &self.template,
            query.persona,
            query.first.text,
            query.second.text,
            query.repeat,
        )?;
        match response.parsed {
            Some(Parsed::Choice(c)) => Ok(c),
            _ => Err(OracleError::QueryFailure("completion carried no choice".into())),
        }
    }
}

//! Live HTTP client for OpenAI-compatible `/chat/completions` endpoints.
//!
//! Covers both OpenAI itself and compatible gateways (e.g. Groq for Llama
//! models) via per-model base-URL overrides. Transient failures (HTTP 429,
//! 5xx, transport errors) are retried with exponential backoff; auth failures
//! are surfaced immediately.

use std::collections::HashMap;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::model::UsageRecord;
use crate::provider::{
    ChatProvider, ChatRequest, ChatResponse, ProviderError, RetryPolicy, Semaphore,
};

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "DIALOGUE_FORGE_API_KEY";

const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone)]
pub struct OpenAiConfig {
    /// Base URL up to (not including) `/chat/completions`.
    pub base_url: String,
    /// Per-model base-URL overrides, e.g. Llama models routed to Groq.
    pub model_base_urls: HashMap<String, String>,
    /// Explicit key; when absent the key is read from [`API_KEY_ENV`].
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    /// Upper bound on simultaneous in-flight requests.
    pub concurrency: usize,
    pub request_timeout: Duration,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            model_base_urls: HashMap::new(),
            api_key: None,
            retry: RetryPolicy::default(),
            concurrency: 4,
            request_timeout: Duration::from_secs(120),
        }
    }
}

pub struct OpenAiClient {
    config: OpenAiConfig,
    api_key: String,
    http: reqwest::blocking::Client,
    semaphore: Semaphore,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Debug, Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

enum CallError {
    Fatal(ProviderError),
    Transient(String),
}

impl OpenAiClient {
    pub fn new(config: OpenAiConfig) -> Result<Self, ProviderError> {
        let api_key = match &config.api_key {
            Some(key) => key.clone(),
            None => std::env::var(API_KEY_ENV)
                .map_err(|_| ProviderError::MissingApiKey(API_KEY_ENV.to_string()))?,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let semaphore = Semaphore::new(config.concurrency);
        Ok(Self {
            config,
            api_key,
            http,
            semaphore,
        })
    }

    fn endpoint_for(&self, model: &str) -> String {
        let base = self
            .config
            .model_base_urls
            .get(model)
            .map(String::as_str)
            .unwrap_or(&self.config.base_url);
        format!("{}/chat/completions", base.trim_end_matches('/'))
    }

    fn call_once(&self, request: &ChatRequest) -> Result<ChatResponse, CallError> {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        let response = self
            .http
            .post(self.endpoint_for(&request.model))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| CallError::Transient(format!("send failed: {e}")))?;

        let status = response.status();
        let text = response
            .text()
            .map_err(|e| CallError::Transient(format!("read body failed: {e}")))?;

        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(CallError::Fatal(ProviderError::Auth {
                status: status.as_u16(),
                body: truncate(&text),
            }));
        }
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(CallError::Transient(format!(
                "HTTP {}: {}",
                status.as_u16(),
                truncate(&text)
            )));
        }
        if !status.is_success() {
            return Err(CallError::Fatal(ProviderError::Http {
                status: status.as_u16(),
                body: truncate(&text),
            }));
        }

        let wire: WireResponse = serde_json::from_str(&text).map_err(|e| {
            CallError::Fatal(ProviderError::MalformedResponse(format!(
                "{e} in body: {}",
                truncate(&text)
            )))
        })?;
        let text = wire
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or_else(|| {
                CallError::Fatal(ProviderError::MalformedResponse(
                    "response carries no message content".into(),
                ))
            })?;
        let usage = wire.usage.ok_or_else(|| {
            CallError::Fatal(ProviderError::MalformedResponse(
                "response carries no usage".into(),
            ))
        })?;
        Ok(ChatResponse {
            text,
            usage: UsageRecord::new(usage.prompt_tokens, usage.completion_tokens),
        })
    }
}

impl ChatProvider for OpenAiClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let _permit = self.semaphore.acquire();
        let mut last_error = String::new();
        for attempt in 1..=self.config.retry.max_attempts {
            if attempt > 1 {
                std::thread::sleep(self.config.retry.delay_before(attempt - 1));
            }
            match self.call_once(request) {
                Ok(response) => return Ok(response),
                Err(CallError::Fatal(error)) => return Err(error),
                Err(CallError::Transient(message)) => {
                    log::warn!(
                        "transient provider failure for model {} (attempt {attempt}/{}): {message}",
                        request.model,
                        self.config.retry.max_attempts
                    );
                    last_error = message;
                }
            }
        }
        Err(ProviderError::RetriesExhausted {
            attempts: self.config.retry.max_attempts,
            last_error,
        })
    }
}

fn truncate(text: &str) -> String {
    const LIMIT: usize = 300;
    if text.len() <= LIMIT {
        text.to_string()
    } else {
        let mut end = LIMIT;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &text[..end])
    }
}

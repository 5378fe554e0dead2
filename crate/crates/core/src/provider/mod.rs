//! Chat-completion backends: a live OpenAI-compatible HTTP client and a
//! deterministic scripted mock for offline runs.

mod mock;
mod openai;

pub use mock::{Scenario, ScenarioEntry, ScriptedProvider, ScriptedReply};
pub use openai::{OpenAiClient, OpenAiConfig};

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::UsageRecord;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed (HTTP {status}): {body}")]
    Auth { status: u16, body: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("retries exhausted after {attempts} attempts: {last_error}")]
    RetriesExhausted { attempts: u32, last_error: String },
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("API key not configured: set the {0} environment variable")]
    MissingApiKey(String),
    #[error("mock scenario error: {0}")]
    Scenario(String),
    #[error("script underrun: scenario entry `{tag}` has {scripted} replies but call {requested} was requested")]
    ScriptUnderrun {
        tag: String,
        scripted: usize,
        requested: usize,
    },
    #[error("no scenario entry matches request for model `{model}`")]
    NoScenarioMatch { model: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// One chat-completion request. Constructed through [`ChatRequest::new`] so
/// the message-shape invariants hold everywhere downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// Validates that the temperature is in `[0, 2]`, that a system message
    /// (if any) is the first message only, and that user/assistant contents
    /// are non-empty.
    pub fn new(
        model: impl Into<String>,
        temperature: f64,
        messages: Vec<ChatMessage>,
    ) -> Result<Self, ProviderError> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {temperature} outside [0, 2]"
            )));
        }
        if messages.is_empty() {
            return Err(ProviderError::InvalidRequest("no messages".into()));
        }
        for (index, message) in messages.iter().enumerate() {
            if message.role == Role::System && index != 0 {
                return Err(ProviderError::InvalidRequest(format!(
                    "system message must come first, found one at position {}",
                    index + 1
                )));
            }
            if message.role != Role::System && message.content.is_empty() {
                return Err(ProviderError::InvalidRequest(format!(
                    "empty {:?} message at position {}",
                    message.role,
                    index + 1
                )));
            }
        }
        Ok(Self {
            model: model.into(),
            temperature,
            messages,
        })
    }

    pub fn system_content(&self) -> Option<&str> {
        self.messages
            .first()
            .filter(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: UsageRecord,
}

/// Backoff for transient failures (HTTP 429/5xx and transport errors):
/// `base_delay * factor^(attempt-1)` between attempts.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, next_attempt: u32) -> Duration {
        let exponent = next_attempt.saturating_sub(1) as i32;
        self.base_delay.mul_f64(self.factor.powi(exponent))
    }
}

/// A uniform chat-completion backend. Implementations are shareable across
/// threads; in-flight concurrency is bounded by the implementation.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).complete(request)
    }
}

/// Counting semaphore bounding simultaneous provider calls.
#[derive(Debug)]
pub(crate) struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub(crate) fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub(crate) struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

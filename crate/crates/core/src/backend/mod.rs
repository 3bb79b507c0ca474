//! Chat-completion backends.
//!
//! Every LLM call in the pipeline goes through [`ChatBackend`]. Requests
//! are tagged with the [`Role`] that issued them so that sampling profiles
//! and replay lanes stay separate for the tracer, tutor, intent selector
//! and simulated student.

use std::fmt;
use std::str::FromStr;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

mod http;
mod recording;
mod replay;

pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use recording::{RecordedCall, RecordingBackend};
pub use replay::{FixtureError, FixtureRecord, ReplayBackend};

pub const DEFAULT_MODEL: &str = "gpt-4o-2024-08-06";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Tracer,
    Tutor,
    Selector,
    Student,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Tracer, Role::Tutor, Role::Selector, Role::Student];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Tracer => "tracer",
            Role::Tutor => "tutor",
            Role::Selector => "selector",
            Role::Student => "student",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: MessageRole,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message { role: MessageRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message { role: MessageRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message { role: MessageRole::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
}

impl SamplingParams {
    pub fn new(temperature: f64, top_p: f64) -> Self {
        SamplingParams {
            model: DEFAULT_MODEL.to_string(),
            temperature,
            top_p,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        Ok(())
    }
}

/// Sampling parameters for each calling role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleProfiles {
    pub tracer: SamplingParams,
    pub tutor: SamplingParams,
    pub selector: SamplingParams,
    pub student: SamplingParams,
}

impl Default for RoleProfiles {
    fn default() -> Self {
        RoleProfiles {
            tracer: SamplingParams::new(0.0, 0.1),
            tutor: SamplingParams::new(1.0, 1.0),
            selector: SamplingParams::new(0.0, 0.1),
            student: SamplingParams::new(1.0, 1.0),
        }
    }
}

impl RoleProfiles {
    pub fn get(&self, role: Role) -> &SamplingParams {
        match role {
            Role::Tracer => &self.tracer,
            Role::Tutor => &self.tutor,
            Role::Selector => &self.selector,
            Role::Student => &self.student,
        }
    }

    pub fn set_model(&mut self, model: &str) {
        for p in [&mut self.tracer, &mut self.tutor, &mut self.selector, &mut self.student] {
            p.model = model.to_string();
        }
    }

    pub fn request(&self, role: Role, messages: Vec<Message>) -> ChatRequest {
        ChatRequest {
            role,
            messages,
            params: self.get(role).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub role: Role,
    pub messages: Vec<Message>,
    pub params: SamplingParams,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("request has no messages".into()));
        }
        self.params.validate().map_err(BackendError::InvalidRequest)
    }

    /// Stable hex digest of the role, messages and sampling parameters.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("requests always serialize");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallMeta {
    pub latency_ms: u64,
    pub model: String,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub content: String,
    pub meta: CallMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {status}")]
    Http { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("replay fixture exhausted for lane `{lane}`")]
    ExhaustedFixture { lane: String },
    #[error("request fingerprint {actual} does not match recorded {expected}")]
    FingerprintMismatch { expected: String, actual: String },
    #[error("missing API credentials (set {API_KEY_ENV})")]
    MissingCredentials,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    /// Failures worth retrying: timeouts, dropped connections, rate limits
    /// and server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport(_) => true,
            BackendError::Http { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError>;
}

#[async_trait]
impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    async fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        (**self).complete(request).await
    }
}

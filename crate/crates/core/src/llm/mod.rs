//! Language-model access: provider trait and implementations (live HTTP,
//! fixture stub, record/replay), prompt templates, and JSON extraction with a
//! single repair round-trip.

mod extract;
mod http;
pub mod prompts;
mod record;
mod stub;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use extract::{
    check_schema, extract_json, repair_roundtrip, request_json, Adjustment, AssessmentReply, DeltaOp,
    JsonReply, ParamDelta, SchemaId, ScoreReply,
};
pub use http::{network_ops, HttpConfig, HttpProvider, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use prompts::{render_prompt, template, PromptTemplate};
pub use record::RecordingProvider;
pub use stub::{CallRecord, StubProvider};

/// Stage a request belongs to; also the fixture file prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Schema,
    Grammar,
    Assess,
    Revise,
    Params,
    RankSemantic,
    RankSize,
    Refine,
    Describe,
}

impl Purpose {
    pub const ALL: [Purpose; 9] = [
        Purpose::Schema,
        Purpose::Grammar,
        Purpose::Assess,
        Purpose::Revise,
        Purpose::Params,
        Purpose::RankSemantic,
        Purpose::RankSize,
        Purpose::Refine,
        Purpose::Describe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Schema => "schema",
            Purpose::Grammar => "grammar",
            Purpose::Assess => "assess",
            Purpose::Revise => "revise",
            Purpose::Params => "params",
            Purpose::RankSemantic => "rank_semantic",
            Purpose::RankSize => "rank_size",
            Purpose::Refine => "refine",
            Purpose::Describe => "describe",
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Purpose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Purpose::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown purpose `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub purpose: Purpose,
    /// Sub-stream the request belongs to (a variant id, usually). Stub and
    /// recording providers key fixtures by it; live providers ignore it.
    pub scope: Option<String>,
}

impl ChatRequest {
    pub fn check(&self) -> Result<(), LlmError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(LlmError::Request("at least one user message is required".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::Request(format!("invalid temperature {}", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("provider configuration error: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    Request(String),
    #[error("no fixture for {purpose} #{seq}{}", scope.as_deref().map(|s| format!(" (scope {s})")).unwrap_or_default())]
    MissingFixture {
        purpose: Purpose,
        seq: usize,
        scope: Option<String>,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("no JSON object found in reply")]
    NoJson,
    #[error("reply does not match schema at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("reply still invalid after repair ({error}); first reply: {first:?}; second reply: {second:?}")]
    RepairFailed {
        first: String,
        second: String,
        error: String,
    },
    #[error("prompt template error: {0}")]
    Template(String),
    #[error("fixture I/O: {0}")]
    Io(String),
}

impl LlmError {
    /// Whether the error is a failure to parse or validate a reply, as opposed
    /// to a failure to obtain one.
    pub fn is_reply_error(&self) -> bool {
        matches!(
            self,
            LlmError::NoJson | LlmError::Schema { .. } | LlmError::RepairFailed { .. }
        )
    }
}

pub trait LlmProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for &P {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for Box<P> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<P: LlmProvider + ?Sized> LlmProvider for std::sync::Arc<P> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Request settings shared by every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSettings {
    pub model: String,
    pub max_tokens: u32,
    pub generation_temperature: f64,
    pub evaluation_temperature: f64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            model: "gpt-4o-mini".into(),
            max_tokens: 2048,
            generation_temperature: 0.7,
            evaluation_temperature: 0.2,
        }
    }
}

impl LlmSettings {
    pub fn temperature(&self, purpose: Purpose) -> f64 {
        match purpose {
            Purpose::Grammar | Purpose::Params | Purpose::Refine | Purpose::Revise => {
                self.generation_temperature
            }
            Purpose::Schema
            | Purpose::Assess
            | Purpose::RankSemantic
            | Purpose::RankSize
            | Purpose::Describe => self.evaluation_temperature,
        }
    }

    pub fn request(&self, purpose: Purpose, messages: Vec<Message>, scope: Option<&str>) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages,
            temperature: self.temperature(purpose),
            max_tokens: self.max_tokens,
            purpose,
            scope: scope.map(str::to_string),
        }
    }
}

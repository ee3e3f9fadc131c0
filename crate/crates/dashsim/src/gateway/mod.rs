//! Prompting the two model roles: script generation from video frames and
//! feature-probability extraction.

mod http;
mod mock;
mod parse;
mod prompt;
mod registry;

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use dashsim_core::{FeatureId, FeatureVector};
use serde::{Deserialize, Serialize};

use crate::frames::FramePack;

pub use http::{HttpBackend, HttpConfig, InFlightLimit};
pub use mock::{MockFeatureBackend, MockMode, MockScriptBackend};
pub use parse::{extract_script, parse_features};
pub use prompt::{FEATURE_SYSTEM_HEADER, SCRIPT_SYSTEM, feature_system_text, request_body, validation_feedback};
pub use registry::{FewShotRegistry, RegistryError};

/// Feedback prefix used when a generated script fails validation.
pub const REPAIR_PREFIX: &str = "the script failed validation: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Script,
    Feature,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExamplePayload {
    Script(String),
    Features(FeatureVector),
}

impl ExamplePayload {
    /// What the assistant turn of the example says.
    pub fn text(&self) -> String {
        match self {
            ExamplePayload::Script(s) => s.clone(),
            ExamplePayload::Features(v) => features_json(v),
        }
    }
}

/// `{"sunny_rainy": p, ...}` with keys in taxonomy order.
pub fn features_json(v: &FeatureVector) -> String {
    let body: Vec<String> = FeatureId::ALL
        .iter()
        .map(|f| format!("\"{}\": {}", f.as_str(), serde_json::Value::from(v.get(*f))))
        .collect();
    format!("{{{}}}", body.join(", "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FewShotExample {
    pub label: String,
    pub frames: FramePack,
    pub payload: ExamplePayload,
}

#[derive(Debug, Clone)]
pub struct PromptPayload {
    pub role: Role,
    pub system_text: String,
    pub examples: Arc<[FewShotExample]>,
    pub query_frames: FramePack,
    pub feedback: Option<String>,
    pub prior_script: Option<String>,
}

impl PromptPayload {
    pub fn new(
        role: Role,
        system_text: String,
        examples: Arc<[FewShotExample]>,
        query_frames: FramePack,
        feedback: Option<String>,
        prior_script: Option<String>,
    ) -> Result<Self, GatewayError> {
        if feedback.is_some() && prior_script.is_none() {
            return Err(GatewayError::new(ErrorKind::MalformedResponse, "feedback given without the prior script"));
        }
        let wrong_kind = examples.iter().find(|e| {
            !matches!(
                (role, &e.payload),
                (Role::Script, ExamplePayload::Script(_)) | (Role::Feature, ExamplePayload::Features(_))
            )
        });
        if let Some(e) = wrong_kind {
            return Err(GatewayError::new(
                ErrorKind::MalformedResponse,
                format!("example `{}` does not match the {role:?} role", e.label),
            ));
        }
        Ok(PromptPayload { role, system_text, examples, query_frames, feedback, prior_script })
    }

    /// Leading examples that fit the backend's example and image limits,
    /// leaving room for the query frames.
    pub fn examples_within(&self, caps: Capabilities) -> &[FewShotExample] {
        let mut images = self.query_frames.images.len();
        let mut n = 0;
        for e in self.examples.iter().take(caps.max_examples) {
            if images + e.frames.images.len() > caps.max_images {
                break;
            }
            images += e.frames.images.len();
            n += 1;
        }
        &self.examples[..n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub max_examples: usize,
    pub max_images: usize,
}

impl Default for Capabilities {
    fn default() -> Self {
        Capabilities { max_examples: 20, max_images: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub model: String,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Transport,
    RateLimited,
    Deadline,
    MalformedResponse,
    Refusal,
}

impl ErrorKind {
    pub fn retryable(self) -> bool {
        matches!(self, ErrorKind::Transport | ErrorKind::RateLimited | ErrorKind::Deadline)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayError {
    pub kind: ErrorKind,
    pub detail: String,
    pub retryable: bool,
    pub attempts: u32,
}

impl GatewayError {
    pub fn new(kind: ErrorKind, detail: impl Into<String>) -> Self {
        GatewayError { kind, detail: detail.into(), retryable: kind.retryable(), attempts: 1 }
    }
}

impl fmt::Display for GatewayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} after {} attempt(s): {}", self.kind, self.attempts, self.detail)
    }
}

impl std::error::Error for GatewayError {}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, payload: &PromptPayload) -> Result<Completion, GatewayError>;

    fn capabilities(&self) -> Capabilities {
        Capabilities::default()
    }

    fn info(&self) -> BackendInfo;
}

/// One model call as recorded in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: Role,
    pub model: String,
    pub temperature: f64,
    pub attempts: u32,
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ScriptReply {
    pub text: String,
    pub call: CallRecord,
}

#[derive(Debug, Clone)]
pub struct FeatureReply {
    pub vector: FeatureVector,
    pub call: CallRecord,
}

/// A failed call together with its record.
#[derive(Debug, Clone)]
pub struct CallFailure {
    pub error: GatewayError,
    pub call: CallRecord,
}

#[derive(Clone)]
pub struct Gateway {
    pub script: Arc<dyn CompletionBackend>,
    pub feature: Arc<dyn CompletionBackend>,
    script_examples: Arc<[FewShotExample]>,
    feature_examples: Arc<[FewShotExample]>,
}

impl Gateway {
    pub fn new(
        script: Arc<dyn CompletionBackend>,
        feature: Arc<dyn CompletionBackend>,
        registry: &FewShotRegistry,
    ) -> Self {
        Gateway {
            script,
            feature,
            script_examples: registry.script.clone().into(),
            feature_examples: registry.feature.clone().into(),
        }
    }

    pub fn script_payload(
        &self,
        frames: &FramePack,
        feedback: Option<&str>,
        prior: Option<&str>,
    ) -> Result<PromptPayload, GatewayError> {
        PromptPayload::new(
            Role::Script,
            SCRIPT_SYSTEM.into(),
            self.script_examples.clone(),
            frames.clone(),
            feedback.map(String::from),
            prior.map(String::from),
        )
    }

    pub fn feature_payload(&self, frames: &FramePack) -> Result<PromptPayload, GatewayError> {
        PromptPayload::new(
            Role::Feature,
            feature_system_text(),
            self.feature_examples.clone(),
            frames.clone(),
            None,
            None,
        )
    }

    /// Asks for a script; the reply has fences and surrounding prose removed.
    pub fn generate_script(
        &self,
        frames: &FramePack,
        feedback: Option<&str>,
        prior: Option<&str>,
    ) -> Result<ScriptReply, CallFailure> {
        let start = Instant::now();
        let record = |attempts, error: Option<String>| {
            call_record(Role::Script, &self.script.info(), attempts, start, error, Vec::new())
        };
        let result = self.script_payload(frames, feedback, prior).and_then(|p| self.script.complete(&p));
        match result {
            Ok(c) => Ok(ScriptReply { text: extract_script(&c.text), call: record(c.attempts, None) }),
            Err(e) => Err(CallFailure { call: record(e.attempts, Some(e.to_string())), error: e }),
        }
    }

    pub fn extract_features(&self, frames: &FramePack) -> Result<FeatureReply, CallFailure> {
        let start = Instant::now();
        let info = self.feature.info();
        let result = self.feature_payload(frames).and_then(|p| self.feature.complete(&p));
        let c = result.map_err(|e| CallFailure {
            call: call_record(Role::Feature, &info, e.attempts, start, Some(e.to_string()), Vec::new()),
            error: e,
        })?;
        match parse_features(&c.text) {
            Ok((vector, warnings)) => {
                for w in &warnings {
                    tracing::warn!("feature response: {w}");
                }
                Ok(FeatureReply { vector, call: call_record(Role::Feature, &info, c.attempts, start, None, warnings) })
            }
            Err(mut e) => {
                e.attempts = c.attempts;
                Err(CallFailure {
                    call: call_record(Role::Feature, &info, c.attempts, start, Some(e.to_string()), Vec::new()),
                    error: e,
                })
            }
        }
    }
}

fn call_record(
    role: Role,
    info: &BackendInfo,
    attempts: u32,
    start: Instant,
    error: Option<String>,
    warnings: Vec<String>,
) -> CallRecord {
    CallRecord {
        role,
        model: info.model.clone(),
        temperature: info.temperature,
        attempts,
        elapsed_s: start.elapsed().as_secs_f64(),
        error,
        warnings,
    }
}

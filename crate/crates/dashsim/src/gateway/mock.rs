//! Deterministic stand-ins for the two model roles, driven by `.mockvid`
//! descriptors.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};

use dashsim_core::features::{default_taxonomy, parse_feedback};
use dashsim_core::scenic::edit::{set_features, substitute_classes};
use dashsim_core::{Catalog, Direction, FeatureVector, ScenicScript};
use serde::{Deserialize, Serialize};

use super::{
    BackendInfo, Completion, CompletionBackend, ErrorKind, GatewayError, PromptPayload, REPAIR_PREFIX, features_json,
};
use crate::mockvid::MockVideo;

/// Stand-in class for objects the catalog lacks.
const SUBSTITUTE_CLASS: &str = "Pedestrian";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// Applies every feature named in the feedback.
    #[default]
    Faithful,
    /// Applies only the first feature named in the feedback.
    OneAtATime,
    /// Ignores feedback and repeats its first answer.
    Stall,
}

fn query_video(payload: &PromptPayload) -> Result<MockVideo, GatewayError> {
    MockVideo::load(&payload.query_frames.source.path).map_err(|e| GatewayError::new(ErrorKind::Refusal, e.to_string()))
}

fn fenced(script: &str) -> String {
    format!("Here is the scenario:\n```scenic\n{}\n```\n", script.trim_end())
}

pub struct MockScriptBackend {
    scripts: BTreeMap<String, String>,
    catalog: Catalog,
    mode: MockMode,
    calls: AtomicUsize,
}

impl MockScriptBackend {
    pub fn new(scripts: BTreeMap<String, String>, catalog: Catalog, mode: MockMode) -> Self {
        MockScriptBackend { scripts, catalog, mode, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn canned(&self, video: &MockVideo) -> Result<String, GatewayError> {
        if let Some(s) = &video.script {
            return Ok(s.clone());
        }
        let name = video
            .fixture
            .as_deref()
            .ok_or_else(|| GatewayError::new(ErrorKind::Refusal, "video names no fixture and carries no script"))?;
        self.scripts
            .get(name)
            .cloned()
            .ok_or_else(|| GatewayError::new(ErrorKind::Refusal, format!("no corpus script named `{name}`")))
    }

    // Swaps classes the catalog lacks for a stand-in. Unparseable text comes
    // back unchanged.
    fn repair(&self, prior: &str) -> String {
        let Ok(script) = ScenicScript::parse(prior) else {
            return prior.to_string();
        };
        let tree = substitute_classes(&script.tree, |c| {
            (!self.catalog.has_class(c)).then(|| SUBSTITUTE_CLASS.to_string())
        });
        ScenicScript::from_tree(tree).source
    }

    fn revise(&self, prior: &str, feedback: &str) -> String {
        let Ok(script) = ScenicScript::parse(prior) else {
            return prior.to_string();
        };
        let mut edits: Vec<_> = parse_feedback(feedback, &default_taxonomy())
            .into_iter()
            .map(|(f, d)| (f, d == Direction::MissingInSim))
            .collect();
        if self.mode == MockMode::OneAtATime {
            edits.truncate(1);
        }
        ScenicScript::from_tree(set_features(&script.tree, edits)).source
    }
}

impl CompletionBackend for MockScriptBackend {
    fn complete(&self, payload: &PromptPayload) -> Result<Completion, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let video = query_video(payload)?;
        let text = match (&payload.feedback, &payload.prior_script) {
            (Some(fb), Some(prior)) if fb.starts_with(REPAIR_PREFIX) => self.repair(prior),
            (Some(_), Some(_)) if self.mode == MockMode::Stall => self.canned(&video)?,
            (Some(fb), Some(prior)) => self.revise(prior, fb),
            _ => self.canned(&video)?,
        };
        Ok(Completion { text: fenced(&text), attempts: 1 })
    }

    fn info(&self) -> BackendInfo {
        BackendInfo { model: format!("mock-script-{}", mode_name(self.mode)), temperature: 0.0 }
    }
}

fn mode_name(mode: MockMode) -> &'static str {
    match mode {
        MockMode::Faithful => "faithful",
        MockMode::OneAtATime => "one-at-a-time",
        MockMode::Stall => "stall",
    }
}

/// Reports the descriptor's `features`, or else the static hints of its
/// script (or of its fixture's corpus script) as a 0/1 vector.
pub struct MockFeatureBackend {
    scripts: BTreeMap<String, String>,
    calls: AtomicUsize,
    per_video: Mutex<BTreeMap<PathBuf, usize>>,
}

impl MockFeatureBackend {
    pub fn new(scripts: BTreeMap<String, String>) -> Self {
        MockFeatureBackend { scripts, calls: AtomicUsize::new(0), per_video: Mutex::new(BTreeMap::new()) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, video: &std::path::Path) -> usize {
        self.per_video.lock().unwrap().get(video).copied().unwrap_or(0)
    }

    pub fn vector_for(&self, video: &MockVideo) -> Result<FeatureVector, GatewayError> {
        if let Some(v) = &video.features {
            return Ok(v.clone());
        }
        let source = match (&video.script, &video.fixture) {
            (Some(s), _) => s.clone(),
            (None, Some(name)) => self
                .scripts
                .get(name)
                .cloned()
                .ok_or_else(|| GatewayError::new(ErrorKind::Refusal, format!("no corpus script named `{name}`")))?,
            (None, None) => return Err(GatewayError::new(ErrorKind::Refusal, "video carries no features or script")),
        };
        let script = ScenicScript::parse(&source)
            .map_err(|_| GatewayError::new(ErrorKind::Refusal, "video script does not parse"))?;
        Ok(FeatureVector::indicator(&script.static_feature_hints()))
    }
}

impl CompletionBackend for MockFeatureBackend {
    fn complete(&self, payload: &PromptPayload) -> Result<Completion, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        *self.per_video.lock().unwrap().entry(payload.query_frames.source.path.clone()).or_default() += 1;
        let video = query_video(payload)?;
        let v = self.vector_for(&video)?;
        Ok(Completion { text: format!("Probabilities:\n{}\n", features_json(&v)), attempts: 1 })
    }

    fn info(&self) -> BackendInfo {
        BackendInfo { model: "mock-feature".into(), temperature: 0.0 }
    }
}

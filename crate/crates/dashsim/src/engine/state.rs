use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use dashsim_core::features::TAXONOMY_VERSION;
use dashsim_core::{Diagnostic, FeatureVector, SimilarityReport};
use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::config::PipelineConfig;
use crate::frames::{PackManifest, VideoRef};
use crate::fsutil::write_json;
use crate::gateway::CallRecord;
use crate::sim::SimResult;

pub const MANIFEST: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    BudgetExhausted,
    ValidationFailed,
    SimulationFailed,
    GatewayFailed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Accepted => "accepted",
            Outcome::BudgetExhausted => "budget_exhausted",
            Outcome::ValidationFailed => "validation_failed",
            Outcome::SimulationFailed => "simulation_failed",
            Outcome::GatewayFailed => "gateway_failed",
        }
    }

    /// Gateway failures may be transient, so such runs can be resumed.
    pub fn is_final(self) -> bool {
        self != Outcome::GatewayFailed
    }
}

/// Seconds spent per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub generate_s: f64,
    pub simulate_s: f64,
    pub frames_s: f64,
    pub extract_s: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.generate_s + self.simulate_s + self.frames_s + self.extract_s
    }

    pub fn add(&mut self, other: &StageTimings) {
        self.generate_s += other.generate_s;
        self.simulate_s += other.simulate_s;
        self.frames_s += other.frames_s;
        self.extract_s += other.extract_s;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub index: usize,
    pub script: String,
    pub line_count: usize,
    pub diagnostics: Vec<Diagnostic>,
    /// The script shown here came from a validation repair.
    pub repaired: bool,
    pub sim: Option<SimResult>,
    pub sim_features: Option<FeatureVector>,
    pub report: Option<SimilarityReport>,
    pub feedback_out: Option<String>,
    pub timings: StageTimings,
    pub calls: Vec<CallRecord>,
}

impl IterationRecord {
    pub fn dir_name(index: usize) -> String {
        format!("iter_{index:02}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub seed: u64,
    pub taxonomy_version: String,
    pub input_video: VideoRef,
    pub input_frames: Option<PackManifest>,
    pub real_features: Option<FeatureVector>,
    pub iterations: Vec<IterationRecord>,
    pub outcome: Option<Outcome>,
    /// Why the run ended without acceptance.
    pub failure: Option<String>,
    pub config: PipelineConfig,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    /// Time spent inside pipeline steps, summed across resumes.
    pub wall_time_s: f64,
    /// Input-side stage timings.
    pub timings: StageTimings,
    /// Calls not tied to an iteration.
    pub calls: Vec<CallRecord>,
}

impl RunState {
    pub fn new(run_id: String, seed: u64, input_video: VideoRef, config: PipelineConfig) -> Self {
        let now = Utc::now();
        RunState {
            run_id,
            seed,
            taxonomy_version: TAXONOMY_VERSION.into(),
            input_video,
            input_frames: None,
            real_features: None,
            iterations: Vec::new(),
            outcome: None,
            failure: None,
            config,
            created_at: now,
            updated_at: now,
            wall_time_s: 0.0,
            timings: StageTimings::default(),
            calls: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self, EngineError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| EngineError::Manifest { path: path.clone(), detail: e.to_string() })?;
        serde_json::from_str(&text).map_err(|e| EngineError::Manifest { path, detail: e.to_string() })
    }

    pub fn save(&mut self, dir: &Path) -> Result<(), EngineError> {
        self.updated_at = Utc::now();
        write_json(&dir.join(MANIFEST), self).map_err(|e| EngineError::io(dir.join(MANIFEST), e))
    }

    /// Script lines of the last iteration.
    pub fn final_line_count(&self) -> Option<usize> {
        self.iterations.last().map(|it| it.line_count)
    }

    pub fn total_timings(&self) -> StageTimings {
        let mut t = self.timings;
        for it in &self.iterations {
            t.add(&it.timings);
        }
        t
    }
}

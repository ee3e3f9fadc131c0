//! Pipeline configuration: one TOML document, overridable per key through
//! `DASHSIM_<SECTION>__<KEY>` environment variables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dashsim_core::{FeatureId, ThresholdConfig};
use serde::{Deserialize, Serialize};

use crate::frames::{DEFAULT_EXTRACT_COMMAND, DEFAULT_PROBE_COMMAND, FrameSettings};
use crate::gateway::MockMode;

pub const ENV_PREFIX: &str = "DASHSIM_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct PipelineConfig {
    pub gateway: GatewayConfig,
    pub frames: FramesConfig,
    pub thresholds: BTreeMap<FeatureId, f64>,
    #[serde(rename = "loop")]
    pub loop_: LoopConfig,
    pub simulator: SimulatorConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayBackend {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewayConfig {
    pub backend: GatewayBackend,
    pub endpoint: String,
    pub script_model: String,
    pub feature_model: String,
    /// Name of the environment variable holding the API key.
    pub credential_env: String,
    pub script_temperature: f64,
    pub feature_temperature: f64,
    pub retry_cap: u32,
    pub deadline_seconds: f64,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
    pub max_in_flight: usize,
    pub max_examples: usize,
    pub max_images: usize,
    pub mock_mode: MockMode,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            backend: GatewayBackend::Mock,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            script_model: "gpt-4o".into(),
            feature_model: "gpt-4o".into(),
            credential_env: "OPENAI_API_KEY".into(),
            script_temperature: 0.2,
            feature_temperature: 0.0,
            retry_cap: 3,
            deadline_seconds: 120.0,
            backoff_base_ms: 500,
            backoff_max_ms: 16_000,
            max_in_flight: 4,
            max_examples: 20,
            max_images: 256,
            mock_mode: MockMode::Faithful,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FramesConfig {
    pub n: usize,
    pub max_dim: u32,
    pub jpeg_quality: u8,
    pub probe_command: String,
    pub extract_command: String,
}

impl Default for FramesConfig {
    fn default() -> Self {
        let s = FrameSettings::default();
        FramesConfig {
            n: s.n,
            max_dim: s.max_dim,
            jpeg_quality: s.jpeg_quality,
            probe_command: DEFAULT_PROBE_COMMAND.into(),
            extract_command: DEFAULT_EXTRACT_COMMAND.into(),
        }
    }
}

impl FramesConfig {
    pub fn settings(&self) -> FrameSettings {
        FrameSettings { n: self.n, max_dim: self.max_dim, jpeg_quality: self.jpeg_quality }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopConfig {
    pub max_iterations: usize,
    /// Regenerations allowed per iteration after a validation failure.
    pub repair_attempts: usize,
    pub batch_parallelism: usize,
    /// End the run as soon as a revision leaves the script tree unchanged.
    pub stop_on_stall: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig { max_iterations: 5, repair_attempts: 1, batch_parallelism: 2, stop_on_stall: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulatorKind {
    Mock,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulatorConfig {
    pub backend: SimulatorKind,
    pub shim_command: String,
    pub max_sim_seconds: f64,
    pub grace_seconds: f64,
    pub mock_width: u32,
    pub mock_height: u32,
    pub mock_fps: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            backend: SimulatorKind::Mock,
            shim_command: "carla-shim".into(),
            max_sim_seconds: 20.0,
            grace_seconds: 30.0,
            mock_width: 320,
            mock_height: 180,
            mock_fps: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub fixtures: PathBuf,
    pub catalog: PathBuf,
    pub runs: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { fixtures: "fixtures".into(), catalog: "data/catalog.json".into(), runs: "runs".into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("config: environment variable {var}: {detail}")]
    Env { var: String, detail: String },
    #[error("config: {key}: {detail}")]
    Invalid { key: String, detail: String },
}

impl PipelineConfig {
    /// Reads `path` (or the defaults when `None`), applies environment
    /// overrides from `env`, resolves relative paths against the config
    /// file's directory and checks the result.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let (mut table, base) = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?;
                let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
                (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        apply_env(&mut table, env)?;
        let mut cfg: PipelineConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for p in [&mut cfg.paths.fixtures, &mut cfg.paths.catalog, &mut cfg.paths.runs] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            // Run manifests snapshot the config, so keep them independent of
            // the working directory.
            if let Ok(abs) = std::path::absolute(&*p) {
                *p = abs;
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        Self::load(None, std::env::vars())
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, detail: &str| Err(ConfigError::Invalid { key: key.into(), detail: detail.into() });
        if self.frames.n == 0 {
            return invalid("frames.n", "must be at least 1");
        }
        if self.frames.max_dim == 0 {
            return invalid("frames.max_dim", "must be positive");
        }
        if !(1..=100).contains(&self.frames.jpeg_quality) {
            return invalid("frames.jpeg_quality", "must lie in 1..=100");
        }
        if self.loop_.max_iterations == 0 {
            return invalid("loop.max_iterations", "must be at least 1");
        }
        if self.loop_.batch_parallelism == 0 {
            return invalid("loop.batch_parallelism", "must be at least 1");
        }
        if !(self.simulator.max_sim_seconds > 0.0) {
            return invalid("simulator.max_sim_seconds", "must be positive");
        }
        if !(self.gateway.deadline_seconds > 0.0) {
            return invalid("gateway.deadline_seconds", "must be positive");
        }
        self.threshold_config()?;
        if !self.paths.catalog.is_file() {
            return invalid("paths.catalog", &format!("{} does not exist", self.paths.catalog.display()));
        }
        if !self.paths.fixtures.is_dir() {
            return invalid("paths.fixtures", &format!("{} does not exist", self.paths.fixtures.display()));
        }
        Ok(())
    }

    pub fn threshold_config(&self) -> Result<ThresholdConfig, ConfigError> {
        ThresholdConfig::with_overrides(self.thresholds.clone())
            .map_err(|e| ConfigError::Invalid { key: "thresholds".into(), detail: e.to_string() })
    }
}


// `DASHSIM_LOOP__MAX_ITERATIONS=3` sets `[loop] max_iterations = 3`. Values
// are read as TOML scalars, falling back to plain strings.
fn apply_env(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
    for (var, raw) in env {
        let Some(rest) = var.strip_prefix(ENV_PREFIX) else { continue };
        let Some((section, key)) = rest.split_once("__") else {
            return Err(ConfigError::Env { var, detail: "expected DASHSIM_<SECTION>__<KEY>".into() });
        };
        let (section, key) = (section.to_ascii_lowercase(), key.to_ascii_lowercase());
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(raw));
        let slot = table.entry(section).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match slot {
            toml::Value::Table(t) => {
                t.insert(key, value);
            }
            _ => return Err(ConfigError::Env { var, detail: "section is not a table".into() }),
        }
    }
    Ok(())
}

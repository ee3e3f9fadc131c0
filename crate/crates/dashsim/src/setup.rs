//! Wiring a configuration into an [`Engine`].

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use dashsim_core::Catalog;

use crate::config::{ConfigError, GatewayBackend, PipelineConfig, SimulatorKind};
use crate::engine::Engine;
use crate::frames::{CommandFrameSource, DispatchFrameSource};
use crate::gateway::{
    Capabilities, CompletionBackend, FewShotRegistry, Gateway, GatewayError, HttpBackend, HttpConfig, InFlightLimit,
    MockFeatureBackend, MockScriptBackend, RegistryError,
};
use crate::sim::{ExternalSimulator, MockSimulator, SimulatorBackend};

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("credential environment variable {0} is not set")]
    Credential(String),
    #[error("catalog {path}: {detail}")]
    Catalog { path: PathBuf, detail: String },
    #[error("fixtures: {0}")]
    Fixtures(#[from] RegistryError),
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
}

pub fn load_catalog(path: &Path) -> Result<Catalog, SetupError> {
    let err = |detail: String| SetupError::Catalog { path: path.into(), detail };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

/// An engine plus handles on the mock backends when they are in use.
pub struct Setup {
    pub engine: Engine,
    pub mock_script: Option<Arc<MockScriptBackend>>,
    pub mock_feature: Option<Arc<MockFeatureBackend>>,
}

/// Builds backends from `cfg`. `env` looks up the credential variable; with
/// the live gateway a missing credential fails here, before any request.
pub fn build(cfg: PipelineConfig, env: impl Fn(&str) -> Option<String>) -> Result<Setup, SetupError> {
    cfg.check()?;
    let catalog = load_catalog(&cfg.paths.catalog)?;
    let registry = FewShotRegistry::load(&cfg.paths.fixtures)?;
    let g = &cfg.gateway;

    let (script, feature, mock_script, mock_feature): (Arc<dyn CompletionBackend>, Arc<dyn CompletionBackend>, _, _) =
        match g.backend {
            GatewayBackend::Mock => {
                let s = Arc::new(MockScriptBackend::new(registry.scripts(), catalog.clone(), g.mock_mode));
                let f = Arc::new(MockFeatureBackend::new(registry.scripts()));
                (s.clone(), f.clone(), Some(s), Some(f))
            }
            GatewayBackend::Http => {
                let key = env(&g.credential_env)
                    .filter(|k| !k.is_empty())
                    .ok_or_else(|| SetupError::Credential(g.credential_env.clone()))?;
                let limit = InFlightLimit::new(g.max_in_flight);
                let http = |model: &str, temperature: f64| HttpConfig {
                    endpoint: g.endpoint.clone(),
                    model: model.into(),
                    temperature,
                    api_key: key.clone(),
                    retry_cap: g.retry_cap,
                    deadline: Duration::from_secs_f64(g.deadline_seconds),
                    backoff_base: Duration::from_millis(g.backoff_base_ms),
                    backoff_max: Duration::from_millis(g.backoff_max_ms),
                    capabilities: Capabilities { max_examples: g.max_examples, max_images: g.max_images },
                };
                let s = HttpBackend::new(http(&g.script_model, g.script_temperature), limit.clone())?;
                let f = HttpBackend::new(http(&g.feature_model, g.feature_temperature), limit)?;
                (Arc::new(s), Arc::new(f), None, None)
            }
        };
    let gateway = Gateway::new(script, feature, &registry);

    let s = &cfg.simulator;
    let simulator: Arc<dyn SimulatorBackend> = match s.backend {
        SimulatorKind::Mock => Arc::new(MockSimulator { fps: s.mock_fps, width: s.mock_width, height: s.mock_height }),
        SimulatorKind::External => Arc::new(ExternalSimulator {
            command: s.shim_command.clone(),
            grace: Duration::from_secs_f64(s.grace_seconds.max(0.0)),
        }),
    };
    let frames = Arc::new(DispatchFrameSource {
        command: CommandFrameSource {
            probe_command: cfg.frames.probe_command.clone(),
            extract_command: cfg.frames.extract_command.clone(),
        },
    });
    let engine = Engine::new(cfg, catalog, gateway, simulator, frames)?;
    Ok(Setup { engine, mock_script, mock_feature })
}

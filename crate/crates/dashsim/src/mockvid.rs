//! `.mockvid` descriptors: JSON files that stand in for video files when no
//! decoder or simulator is around. Frames are rendered on demand.

use std::fs;
use std::path::Path;

use dashsim_core::FeatureVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const EXTENSION: &str = "mockvid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockVideo {
    pub frames: usize,
    pub fps: f64,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    /// Corpus entry the mock script model answers with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    /// Feature probabilities the mock feature model reports for this video.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureVector>,
    /// Script text. On an input video this is the mock script model's canned
    /// answer; on a simulated video it is the script that produced it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<String>,
}

fn default_width() -> u32 {
    320
}

fn default_height() -> u32 {
    180
}

#[derive(Debug, thiserror::Error)]
pub enum MockVideoError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} is not a valid mock video: {source}")]
    Format { path: String, source: serde_json::Error },
    #[error("{path}: frames, fps, width and height must be positive")]
    Empty { path: String },
}

impl MockVideo {
    pub fn new(frames: usize, fps: f64) -> Self {
        MockVideo {
            frames,
            fps,
            width: default_width(),
            height: default_height(),
            fixture: None,
            features: None,
            script: None,
            seed: None,
            identity: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, MockVideoError> {
        let p = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| MockVideoError::Io { path: p.clone(), source })?;
        let v: MockVideo =
            serde_json::from_str(&text).map_err(|source| MockVideoError::Format { path: p.clone(), source })?;
        if v.frames == 0 || !(v.fps > 0.0) || v.width == 0 || v.height == 0 {
            return Err(MockVideoError::Empty { path: p });
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("mock video serializes");
        crate::fsutil::write_atomic(path, text.as_bytes())
    }

    /// Solid RGB colour for frame `index`. Stable across runs.
    pub fn frame_color(&self, index: usize) -> [u8; 3] {
        let mut h = Sha256::new();
        h.update(self.identity.as_deref().unwrap_or("").as_bytes());
        h.update(self.fixture.as_deref().unwrap_or("").as_bytes());
        h.update(self.seed.unwrap_or(0).to_le_bytes());
        h.update((index as u64).to_le_bytes());
        let d = h.finalize();
        [d[0], d[1], d[2]]
    }
}

pub fn is_mock_video(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == EXTENSION)
}

/// Hex SHA-256 of `parts`, each length-prefixed.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

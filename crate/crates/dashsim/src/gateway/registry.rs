use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dashsim_core::FeatureVector;

use super::{ExamplePayload, FewShotExample};
use crate::frames::FramePack;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("cannot read {path}: {detail}")]
    Read { path: PathBuf, detail: String },
}

/// Few-shot examples loaded from `<dir>/script/<name>/{frames/, script.scenic}`
/// and `<dir>/feature/<name>/{frames/, features.json}`, each list ordered by
/// name.
#[derive(Debug, Clone, Default)]
pub struct FewShotRegistry {
    pub script: Vec<FewShotExample>,
    pub feature: Vec<FewShotExample>,
}

fn entries(dir: &Path) -> Result<Vec<(String, PathBuf)>, RegistryError> {
    let read = |e: std::io::Error| RegistryError::Read { path: dir.into(), detail: e.to_string() };
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(read)? {
        let path = entry.map_err(read)?.path();
        if path.is_dir() {
            out.push((path.file_name().unwrap().to_string_lossy().into_owned(), path));
        }
    }
    out.sort();
    Ok(out)
}

fn read_text(path: &Path) -> Result<String, RegistryError> {
    fs::read_to_string(path).map_err(|e| RegistryError::Read { path: path.into(), detail: e.to_string() })
}

fn frames(dir: &Path) -> Result<FramePack, RegistryError> {
    let path = dir.join("frames");
    FramePack::load(&path).map_err(|e| RegistryError::Read { path, detail: e.to_string() })
}

impl FewShotRegistry {
    pub fn load(root: &Path) -> Result<Self, RegistryError> {
        let mut reg = FewShotRegistry::default();
        for (label, dir) in entries(&root.join("script"))? {
            let script = read_text(&dir.join("script.scenic"))?;
            reg.script.push(FewShotExample { frames: frames(&dir)?, payload: ExamplePayload::Script(script), label });
        }
        for (label, dir) in entries(&root.join("feature"))? {
            let path = dir.join("features.json");
            let vector: FeatureVector = serde_json::from_str(&read_text(&path)?)
                .map_err(|e| RegistryError::Read { path: path.clone(), detail: e.to_string() })?;
            reg.feature.push(FewShotExample { frames: frames(&dir)?, payload: ExamplePayload::Features(vector), label });
        }
        Ok(reg)
    }

    /// Script text by example label.
    pub fn scripts(&self) -> BTreeMap<String, String> {
        self.script
            .iter()
            .filter_map(|e| match &e.payload {
                ExamplePayload::Script(s) => Some((e.label.clone(), s.clone())),
                ExamplePayload::Features(_) => None,
            })
            .collect()
    }
}

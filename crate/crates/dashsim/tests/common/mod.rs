#![allow(dead_code)]

pub mod stub;

use std::fs;
use std::path::{Path, PathBuf};

use dashsim::PipelineConfig;
use dashsim::gateway::MockMode;
use dashsim::mockvid::MockVideo;
use dashsim::setup::{self, Setup};
use dashsim_core::{FeatureId, FeatureVector, ScenicScript};

pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn config(mode: MockMode, max_iterations: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.paths.fixtures = root().join("fixtures");
    cfg.paths.catalog = root().join("data/catalog.json");
    cfg.gateway.mock_mode = mode;
    cfg.loop_.max_iterations = max_iterations;
    cfg
}

pub fn mock_setup(mode: MockMode, max_iterations: usize) -> Setup {
    setup::build(config(mode, max_iterations), |_| None).unwrap()
}

pub fn corpus_script(name: &str) -> String {
    fs::read_to_string(root().join("fixtures/script").join(name).join("script.scenic")).unwrap()
}

pub fn corpus_names() -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(root().join("fixtures/script"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

pub fn hints(script: &str) -> FeatureVector {
    FeatureVector::indicator(&ScenicScript::parse(script).unwrap().static_feature_hints())
}

/// `base` with the listed features flipped.
pub fn flip(base: &FeatureVector, features: &[FeatureId]) -> FeatureVector {
    let mut v = base.values().to_vec();
    for f in features {
        v[f.index()] = 1.0 - v[f.index()];
    }
    FeatureVector::new(v).unwrap()
}

pub fn write_video(dir: &Path, name: &str, video: &MockVideo) -> PathBuf {
    let path = dir.join(format!("{name}.mockvid"));
    video.save(&path).unwrap();
    path
}

/// A fixture video whose real features differ from its script's hints on
/// `flipped`.
pub fn fixture_video(dir: &Path, name: &str, fixture: &str, flipped: &[FeatureId]) -> PathBuf {
    let mut v = MockVideo::new(300, 30.0);
    v.fixture = Some(fixture.into());
    if !flipped.is_empty() {
        v.features = Some(flip(&hints(&corpus_script(fixture)), flipped));
    }
    write_video(dir, name, &v)
}

/// A video whose script never validates, not even after repair.
pub fn broken_video(dir: &Path, name: &str, fixture: &str) -> PathBuf {
    let script = corpus_script(fixture);
    let mut v = MockVideo::new(300, 30.0);
    v.features = Some(hints(&script));
    v.script = Some(script.replacen(" = new ", " = nwe ", 1));
    write_video(dir, name, &v)
}

/// Videos for `accepted_first` runs that accept at once, `refined` runs that
/// accept on the second iteration and `failed` runs that fail validation,
/// interleaved.
pub fn mixed_videos(dir: &Path, accepted_first: usize, refined: usize, failed: usize) -> Vec<PathBuf> {
    let names = corpus_names();
    let mut kinds: Vec<u8> = [vec![0; accepted_first], vec![1; refined], vec![2; failed]].concat();
    // Deterministic shuffle so the kinds are spread across batch workers.
    let n = kinds.len();
    for i in 0..n {
        kinds.swap(i, (i * 7 + 3) % n);
    }
    kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            let fixture = &names[i % names.len()];
            let name = format!("v{i:02}");
            match kind {
                0 => fixture_video(dir, &name, fixture, &[]),
                1 => fixture_video(dir, &name, fixture, &[FeatureId::ALL[i % FeatureId::COUNT]]),
                _ => broken_video(dir, &name, fixture),
            }
        })
        .collect()
}

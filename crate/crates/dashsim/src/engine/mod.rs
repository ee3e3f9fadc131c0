//! The refinement loop: generate, validate, simulate, compare, feed back.
//!
//! Every step persists its artifacts and `run.json` before the next one
//! starts, and the next step is derived from the manifest alone, so an
//! interrupted run continues where it stopped.

mod report;
mod state;

use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use dashsim_core::features::{similarity, synthesize_feedback};
use dashsim_core::{Catalog, Diagnostic, ScenicScript, ThresholdConfig};
use sha2::{Digest, Sha256};

pub use report::{AggregateReport, ReportError, percent, report};
pub use state::{IterationRecord, MANIFEST, Outcome, RunState, StageTimings};

use crate::config::PipelineConfig;
use crate::frames::{FrameError, FramePack, FrameSource, build_frame_pack};
use crate::fsutil::{write_atomic, write_json};
use crate::gateway::{CallFailure, Gateway, validation_feedback};
use crate::sim::{SimRequest, SimResult, SimStatus, SimulatorBackend};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("cannot load {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Frames(#[from] FrameError),
    #[error("run {0} has not been accepted")]
    NotAccepted(String),
    #[error("{0}")]
    Usage(String),
}

impl EngineError {
    pub fn io(path: PathBuf, source: std::io::Error) -> Self {
        EngineError::Io { path, source }
    }
}

/// A completed pipeline step, reported to observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    InputFrames,
    RealFeatures,
    Script { iteration: usize },
    Simulation { iteration: usize },
    SimFeatures { iteration: usize },
    Similarity { iteration: usize },
}

/// Called after every persisted step. `Break` stops the run there, leaving it
/// resumable.
pub trait Observer {
    fn after_step(&mut self, state: &RunState, step: Step) -> ControlFlow<()>;
}

impl<F: FnMut(&RunState, Step) -> ControlFlow<()>> Observer for F {
    fn after_step(&mut self, state: &RunState, step: Step) -> ControlFlow<()> {
        self(state, step)
    }
}

struct Continue;

impl Observer for Continue {
    fn after_step(&mut self, _: &RunState, _: Step) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

pub struct Engine {
    pub config: PipelineConfig,
    pub catalog: Catalog,
    thresholds: ThresholdConfig,
    pub gateway: Gateway,
    pub simulator: Arc<dyn SimulatorBackend>,
    pub frames: Arc<dyn FrameSource>,
}

pub fn seed_for(run_id: &str, salt: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(run_id.as_bytes());
    if salt != 0 {
        h.update(salt.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

fn diagnostics_jsonl(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| serde_json::to_string(d).unwrap() + "\n").collect()
}

fn check(source: &str, catalog: &Catalog) -> (Option<ScenicScript>, Vec<Diagnostic>) {
    match ScenicScript::parse(source) {
        Ok(s) => {
            let d = s.validate(catalog);
            (Some(s), d)
        }
        Err(d) => (None, d),
    }
}

fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

fn line_count(source: &str) -> usize {
    source.lines().filter(|l| !l.trim().is_empty()).count()
}

impl Engine {
    pub fn new(
        config: PipelineConfig,
        catalog: Catalog,
        gateway: Gateway,
        simulator: Arc<dyn SimulatorBackend>,
        frames: Arc<dyn FrameSource>,
    ) -> Result<Self, crate::config::ConfigError> {
        let thresholds = config.threshold_config()?;
        Ok(Engine { config, catalog, thresholds, gateway, simulator, frames })
    }

    pub fn thresholds(&self) -> &ThresholdConfig {
        &self.thresholds
    }

    /// Creates `runs_dir/<run id>` for `video` and runs it to an outcome.
    pub fn start(&self, video: &Path, runs_dir: &Path) -> Result<(PathBuf, RunState), EngineError> {
        self.start_with(video, runs_dir, &mut Continue)
    }

    pub fn start_with(
        &self,
        video: &Path,
        runs_dir: &Path,
        observer: &mut dyn Observer,
    ) -> Result<(PathBuf, RunState), EngineError> {
        let input = self.frames.probe(video)?;
        let run_id = uuid::Uuid::new_v4().to_string();
        let dir = runs_dir.join(&run_id);
        fs::create_dir_all(&dir).map_err(|e| EngineError::io(dir.clone(), e))?;
        let seed = seed_for(&run_id, 0);
        let mut state = RunState::new(run_id, seed, input, self.config.clone());
        state.save(&dir)?;
        let state = self.drive(&dir, state, observer)?;
        Ok((dir, state))
    }

    /// Continues an interrupted or gateway-failed run. Finished runs are
    /// returned unchanged.
    pub fn resume(&self, dir: &Path) -> Result<RunState, EngineError> {
        self.resume_with(dir, &mut Continue)
    }

    pub fn resume_with(&self, dir: &Path, observer: &mut dyn Observer) -> Result<RunState, EngineError> {
        let mut state = RunState::load(dir)?;
        match state.outcome {
            Some(o) if o.is_final() => return Ok(state),
            Some(_) => {
                state.outcome = None;
                state.failure = None;
            }
            None => {}
        }
        self.drive(dir, state, observer)
    }

    fn drive(&self, dir: &Path, mut state: RunState, observer: &mut dyn Observer) -> Result<RunState, EngineError> {
        while state.outcome.is_none() {
            let start = Instant::now();
            let step = self.step(dir, &mut state)?;
            state.wall_time_s += start.elapsed().as_secs_f64();
            state.save(dir)?;
            if observer.after_step(&state, step).is_break() {
                break;
            }
        }
        Ok(state)
    }

    fn finish(state: &mut RunState, outcome: Outcome, failure: Option<String>) {
        state.outcome = Some(outcome);
        state.failure = failure;
    }

    fn gateway_failed(state: &mut RunState, what: &str, f: CallFailure) -> CallFailure {
        Self::finish(state, Outcome::GatewayFailed, Some(format!("{what}: {}", f.error)));
        f
    }

    fn step(&self, dir: &Path, st: &mut RunState) -> Result<Step, EngineError> {
        let settings = self.config.frames.settings();
        if st.input_frames.is_none() {
            let t = Instant::now();
            let pack = build_frame_pack(self.frames.as_ref(), &st.input_video.path, &settings)?;
            pack.persist(&dir.join("input"))?;
            st.input_frames = Some(pack.manifest());
            st.timings.frames_s += t.elapsed().as_secs_f64();
            return Ok(Step::InputFrames);
        }
        if st.real_features.is_none() {
            let pack = FramePack::load(&dir.join("input"))?;
            let t = Instant::now();
            let reply = self.gateway.extract_features(&pack);
            st.timings.extract_s += t.elapsed().as_secs_f64();
            match reply {
                Ok(r) => {
                    write_json(&dir.join("real_features.json"), &r.vector).map_err(|e| EngineError::io(dir.into(), e))?;
                    st.real_features = Some(r.vector);
                    st.calls.push(r.call);
                }
                Err(f) => {
                    let f = Self::gateway_failed(st, "real feature extraction", f);
                    st.calls.push(f.call);
                }
            }
            return Ok(Step::RealFeatures);
        }
        let n = st.iterations.len();
        match st.iterations.last() {
            Some(it) if it.sim.is_none() => self.simulate(dir, st).map(|_| Step::Simulation { iteration: n }),
            Some(it) if it.sim_features.is_none() => {
                self.sim_features(dir, st, &settings).map(|_| Step::SimFeatures { iteration: n })
            }
            Some(it) if it.report.is_none() => self.compare(dir, st).map(|_| Step::Similarity { iteration: n }),
            _ => self.generate(dir, st).map(|_| Step::Script { iteration: n + 1 }),
        }
    }

    fn generate(&self, dir: &Path, st: &mut RunState) -> Result<(), EngineError> {
        let index = st.iterations.len() + 1;
        if index > self.config.loop_.max_iterations {
            Self::finish(st, Outcome::BudgetExhausted, Some("iteration budget used up".into()));
            return Ok(());
        }
        let iter_dir = dir.join(IterationRecord::dir_name(index));
        fs::create_dir_all(&iter_dir).map_err(|e| EngineError::io(iter_dir.clone(), e))?;
        let input = FramePack::load(&dir.join("input"))?;
        let prior = st.iterations.last().and_then(|it| Some((it.feedback_out.clone()?, it.script.clone())));

        let mut timings = StageTimings::default();
        let mut calls = Vec::new();
        let t = Instant::now();
        let reply = self.gateway.generate_script(&input, prior.as_ref().map(|p| p.0.as_str()), prior.as_ref().map(|p| p.1.as_str()));
        timings.generate_s += t.elapsed().as_secs_f64();
        let mut text = match reply {
            Ok(r) => {
                calls.push(r.call);
                r.text
            }
            Err(f) => {
                let f = Self::gateway_failed(st, "script generation", f);
                st.calls.push(f.call);
                return Ok(());
            }
        };
        let (mut parsed, mut diags) = check(&text, &self.catalog);
        let mut repaired = false;
        for attempt in 1..=self.config.loop_.repair_attempts {
            if !has_errors(&diags) {
                break;
            }
            let suffix = if attempt == 1 { String::new() } else { format!("_{attempt}") };
            let write = |name: String, body: &str| {
                let p = iter_dir.join(name);
                write_atomic(&p, body.as_bytes()).map_err(|e| EngineError::io(p, e))
            };
            write(format!("rejected_script{suffix}.scenic"), &text)?;
            write(format!("rejected_diagnostics{suffix}.jsonl"), &diagnostics_jsonl(&diags))?;
            let feedback = validation_feedback(&diags);
            let t = Instant::now();
            let reply = self.gateway.generate_script(&input, Some(&feedback), Some(&text));
            timings.generate_s += t.elapsed().as_secs_f64();
            match reply {
                Ok(r) => {
                    calls.push(r.call);
                    text = r.text;
                }
                Err(f) => {
                    let f = Self::gateway_failed(st, "validation repair", f);
                    st.calls.extend(calls);
                    st.calls.push(f.call);
                    return Ok(());
                }
            }
            (parsed, diags) = check(&text, &self.catalog);
            repaired = true;
        }

        let write = |name: &str, body: &str| {
            let p = iter_dir.join(name);
            write_atomic(&p, body.as_bytes()).map_err(|e| EngineError::io(p, e))
        };
        write("script.scenic", &text)?;
        write("diagnostics.jsonl", &diagnostics_jsonl(&diags))?;
        let failed = has_errors(&diags);
        let stalled = !failed
            && self.config.loop_.stop_on_stall
            && st.iterations.last().is_some_and(|prev| {
                let prev = ScenicScript::parse(&prev.script).ok();
                prev.map(|p| p.tree) == parsed.as_ref().map(|s| s.tree.clone())
            });
        st.iterations.push(IterationRecord {
            index,
            line_count: line_count(&text),
            script: text,
            diagnostics: diags,
            repaired,
            sim: None,
            sim_features: None,
            report: None,
            feedback_out: None,
            timings,
            calls,
        });
        if failed {
            let msg = if repaired { "script still invalid after repair" } else { "script invalid" };
            Self::finish(st, Outcome::ValidationFailed, Some(msg.into()));
        } else if stalled {
            Self::finish(st, Outcome::BudgetExhausted, Some("revision left the script unchanged".into()));
        }
        Ok(())
    }

    fn simulate(&self, dir: &Path, st: &mut RunState) -> Result<(), EngineError> {
        let it = st.iterations.last().unwrap();
        let iter_dir = dir.join(IterationRecord::dir_name(it.index));
        // Re-read from disk: after a resume the file is the source of truth.
        let path = iter_dir.join("script.scenic");
        let source = fs::read_to_string(&path).map_err(|e| EngineError::io(path, e))?;
        let (parsed, diags) = check(&source, &self.catalog);
        let script = match parsed {
            Some(s) if !has_errors(&diags) => s,
            _ => {
                Self::finish(st, Outcome::ValidationFailed, Some("persisted script no longer validates".into()));
                return Ok(());
            }
        };
        let sim_dir = iter_dir.join("sim");
        let req = SimRequest {
            script,
            seed: st.seed,
            max_sim_seconds: self.config.simulator.max_sim_seconds,
            output_dir: sim_dir.join("out"),
        };
        let t = Instant::now();
        let result = self.simulator.run(&req);
        let it = st.iterations.last_mut().unwrap();
        it.timings.simulate_s += t.elapsed().as_secs_f64();
        write_json(&sim_dir.join("result.json"), &result).map_err(|e| EngineError::io(sim_dir.clone(), e))?;
        let failure = (result.status != SimStatus::Ok)
            .then(|| format!("simulation {:?}: {}", result.status, result.log_excerpt));
        it.sim = Some(result);
        if let Some(f) = failure {
            Self::finish(st, Outcome::SimulationFailed, Some(f));
        }
        Ok(())
    }

    fn sim_features(&self, dir: &Path, st: &mut RunState, settings: &crate::frames::FrameSettings) -> Result<(), EngineError> {
        let it = st.iterations.last().unwrap();
        let iter_dir = dir.join(IterationRecord::dir_name(it.index));
        let video = it.sim.as_ref().and_then(|s| s.video.clone()).expect("ok simulation has a video");
        let t = Instant::now();
        let pack = match build_frame_pack(self.frames.as_ref(), &video.path, settings) {
            Ok(p) => p,
            Err(e) => {
                Self::finish(st, Outcome::SimulationFailed, Some(format!("simulated video unusable: {e}")));
                return Ok(());
            }
        };
        pack.persist(&iter_dir.join("sim").join("frames"))?;
        let frames_s = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let reply = self.gateway.extract_features(&pack);
        let extract_s = t.elapsed().as_secs_f64();
        let it = st.iterations.last_mut().unwrap();
        it.timings.frames_s += frames_s;
        it.timings.extract_s += extract_s;
        match reply {
            Ok(r) => {
                let p = iter_dir.join("sim_features.json");
                write_json(&p, &r.vector).map_err(|e| EngineError::io(p, e))?;
                it.sim_features = Some(r.vector);
                it.calls.push(r.call);
            }
            Err(f) => {
                it.calls.push(f.call.clone());
                Self::gateway_failed(st, "simulated feature extraction", f);
            }
        }
        Ok(())
    }

    fn compare(&self, dir: &Path, st: &mut RunState) -> Result<(), EngineError> {
        let real = st.real_features.clone().expect("real features before comparison");
        let budget_left = st.iterations.len() < self.config.loop_.max_iterations;
        let it = st.iterations.last_mut().unwrap();
        let iter_dir = dir.join(IterationRecord::dir_name(it.index));
        let sim = it.sim_features.as_ref().expect("sim features before comparison");
        let report = similarity(&real, sim, &self.thresholds).expect("vectors share the taxonomy");
        let p = iter_dir.join("similarity.json");
        write_json(&p, &report).map_err(|e| EngineError::io(p, e))?;
        let passed = report.passed;
        if !passed && budget_left {
            let feedback = synthesize_feedback(&report.violations, self.thresholds.taxonomy()).expect("violations present");
            let p = iter_dir.join("feedback.txt");
            write_atomic(&p, format!("{feedback}\n").as_bytes()).map_err(|e| EngineError::io(p, e))?;
            it.feedback_out = Some(feedback);
        }
        it.report = Some(report);
        if passed {
            Self::finish(st, Outcome::Accepted, None);
        } else if !budget_left {
            Self::finish(st, Outcome::BudgetExhausted, Some("iteration budget used up".into()));
        }
        Ok(())
    }

    /// Simulates an accepted run's final script under `count` further seeds,
    /// writing `variations/seed_<seed>/result.json` for each.
    pub fn variations(&self, dir: &Path, count: usize) -> Result<Vec<SimResult>, EngineError> {
        if count == 0 {
            return Err(EngineError::Usage("variation count must be at least 1".into()));
        }
        let state = RunState::load(dir)?;
        if state.outcome != Some(Outcome::Accepted) {
            return Err(EngineError::NotAccepted(state.run_id));
        }
        let last = state.iterations.last().expect("accepted run has iterations");
        let script = ScenicScript::parse(&last.script)
            .map_err(|_| EngineError::Manifest { path: dir.join(MANIFEST), detail: "accepted script does not parse".into() })?;
        let mut out = Vec::with_capacity(count);
        for k in 1..=count as u64 {
            let seed = seed_for(&state.run_id, k);
            let vdir = dir.join("variations").join(format!("seed_{seed}"));
            let req = SimRequest {
                script: script.clone(),
                seed,
                max_sim_seconds: self.config.simulator.max_sim_seconds,
                output_dir: vdir.join("out"),
            };
            let result = self.simulator.run(&req);
            let p = vdir.join("result.json");
            write_json(&p, &result).map_err(|e| EngineError::io(p, e))?;
            out.push(result);
        }
        Ok(out)
    }

    /// Runs every video with at most `parallelism` runs in flight. Results
    /// come back in input order.
    pub fn batch(
        &self,
        videos: &[PathBuf],
        runs_dir: &Path,
        parallelism: usize,
    ) -> Vec<Result<(PathBuf, RunState), EngineError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<Result<(PathBuf, RunState), EngineError>>>> =
            videos.iter().map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..parallelism.max(1).min(videos.len().max(1)) {
                s.spawn(|| {
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i >= videos.len() {
                            break;
                        }
                        let r = self.start(&videos[i], runs_dir);
                        *slots[i].lock().unwrap() = Some(r);
                    }
                });
            }
        });
        slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot filled")).collect()
    }
}

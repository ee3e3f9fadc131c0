//! Running validated scripts in a simulator: a deterministic mock and an
//! external shim process speaking a JSON request/result protocol.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use dashsim_core::ScenicScript;
use serde::{Deserialize, Serialize};

use crate::frames::VideoRef;
use crate::fsutil::{write_atomic, write_json};
use crate::mockvid::{self, MockVideo};

pub const RESULT_FILE: &str = "result.json";
pub const REQUEST_FILE: &str = "request.json";
const LOG_TAIL: usize = 2000;

#[derive(Debug, Clone)]
pub struct SimRequest {
    pub script: ScenicScript,
    pub seed: u64,
    pub max_sim_seconds: f64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Ok,
    ScenarioError,
    RuntimeError,
    Timeout,
}

impl SimStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SimStatus::Ok => "ok",
            SimStatus::ScenarioError => "scenario_error",
            SimStatus::RuntimeError => "runtime_error",
            SimStatus::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub status: SimStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<VideoRef>,
    pub log_excerpt: String,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl SimResult {
    fn failed(status: SimStatus, log: impl Into<String>, seed: u64, start: Instant) -> Self {
        let mut log_excerpt = log.into();
        if log_excerpt.trim().is_empty() {
            log_excerpt = format!("simulation ended with {status:?} and no log output");
        }
        SimResult { status, video: None, log_excerpt, wall_time_s: start.elapsed().as_secs_f64(), seed }
    }
}

pub trait SimulatorBackend: Send + Sync {
    /// Never fails outright: problems come back as a non-ok status.
    fn run(&self, req: &SimRequest) -> SimResult;
}

/// Writes a `.mockvid` whose identity is a digest of the rendered tree and
/// the seed, and whose script is the rendered tree.
#[derive(Debug, Clone)]
pub struct MockSimulator {
    pub fps: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for MockSimulator {
    fn default() -> Self {
        MockSimulator { fps: 20.0, width: 320, height: 180 }
    }
}

pub fn scene_identity(script: &ScenicScript, seed: u64) -> String {
    mockvid::digest(&[script.render().as_bytes(), &seed.to_le_bytes()])
}

impl SimulatorBackend for MockSimulator {
    fn run(&self, req: &SimRequest) -> SimResult {
        let start = Instant::now();
        let frames = ((req.max_sim_seconds * self.fps).round() as usize).max(1);
        let mut video = MockVideo::new(frames, self.fps);
        video.width = self.width;
        video.height = self.height;
        video.script = Some(req.script.render());
        video.seed = Some(req.seed);
        video.identity = Some(scene_identity(&req.script, req.seed));
        let path = req.output_dir.join(format!("scene.{}", mockvid::EXTENSION));
        if let Err(e) = fs::create_dir_all(&req.output_dir).and_then(|_| video.save(&path)) {
            return SimResult::failed(SimStatus::RuntimeError, format!("cannot write {}: {e}", path.display()), req.seed, start);
        }
        SimResult {
            status: SimStatus::Ok,
            video: Some(VideoRef::new(path, frames, self.fps)),
            log_excerpt: format!("mock scene {}", video.identity.as_deref().unwrap_or_default()),
            wall_time_s: start.elapsed().as_secs_f64(),
            seed: req.seed,
        }
    }
}

#[derive(Debug, Serialize)]
struct ShimRequest<'a> {
    script_path: &'a Path,
    seed: u64,
    max_sim_seconds: f64,
    output_dir: &'a Path,
}

#[derive(Debug, Deserialize)]
struct ShimResult {
    status: SimStatus,
    #[serde(default)]
    video_path: Option<PathBuf>,
    #[serde(default)]
    frames: Option<usize>,
    #[serde(default)]
    fps: Option<f64>,
    #[serde(default)]
    log_excerpt: String,
}

/// Launches `<command> --request <request.json>` in its own process group.
/// The whole group is killed once the shim exits or overruns
/// `max_sim_seconds + grace`.
#[derive(Debug, Clone)]
pub struct ExternalSimulator {
    pub command: String,
    pub grace: Duration,
}

fn tail(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap_or_default();
    let start = text.len().saturating_sub(LOG_TAIL);
    let start = (start..text.len()).find(|i| text.is_char_boundary(*i)).unwrap_or(text.len());
    text[start..].trim().to_string()
}

#[cfg(unix)]
fn kill_group(pgid: u32) {
    // SAFETY: plain syscall; a stale or foreign pgid yields ESRCH/EPERM, which
    // is ignored.
    unsafe {
        libc::kill(-(pgid as libc::pid_t), libc::SIGKILL);
    }
}

impl ExternalSimulator {
    fn launch(&self, req: &SimRequest, start: Instant) -> Result<SimResult, String> {
        let dir = &req.output_dir;
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        let script_path = dir.join("scenario.scenic");
        write_atomic(&script_path, req.script.source.as_bytes()).map_err(|e| e.to_string())?;
        let request_path = dir.join(REQUEST_FILE);
        let request = ShimRequest {
            script_path: &script_path,
            seed: req.seed,
            max_sim_seconds: req.max_sim_seconds,
            output_dir: dir,
        };
        write_json(&request_path, &request).map_err(|e| e.to_string())?;
        let result_path = dir.join(RESULT_FILE);
        let _ = fs::remove_file(&result_path);

        let words = shlex::split(&self.command)
            .filter(|w| !w.is_empty())
            .ok_or_else(|| format!("cannot split shim command `{}`", self.command))?;
        let log_path = dir.join("shim.log");
        let log = File::create(&log_path).map_err(|e| e.to_string())?;
        let mut cmd = Command::new(&words[0]);
        cmd.args(&words[1..])
            .arg("--request")
            .arg(&request_path)
            .stdin(Stdio::null())
            .stdout(log.try_clone().map_err(|e| e.to_string())?)
            .stderr(log);
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd.spawn().map_err(|e| format!("cannot start `{}`: {e}", words[0]))?;
        let pgid = child.id();

        let limit = Duration::from_secs_f64(req.max_sim_seconds.max(0.0)) + self.grace;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if start.elapsed() >= limit => break None,
                Ok(None) => thread::sleep(Duration::from_millis(20)),
                Err(e) => {
                    #[cfg(unix)]
                    kill_group(pgid);
                    let _ = child.wait();
                    return Err(format!("lost track of the shim: {e}"));
                }
            }
        };
        #[cfg(unix)]
        kill_group(pgid);
        let Some(status) = status else {
            let _ = child.wait();
            let log = tail(&log_path);
            return Ok(SimResult::failed(
                SimStatus::Timeout,
                format!("shim exceeded {:.1}s and was killed\n{log}", limit.as_secs_f64()),
                req.seed,
                start,
            ));
        };

        let log = tail(&log_path);
        let parsed: ShimResult = match fs::read_to_string(&result_path) {
            Ok(text) => match serde_json::from_str(&text) {
                Ok(r) => r,
                Err(e) => {
                    return Ok(SimResult::failed(SimStatus::RuntimeError, format!("unreadable {RESULT_FILE}: {e}\n{log}"), req.seed, start));
                }
            },
            Err(_) => {
                return Ok(SimResult::failed(
                    SimStatus::RuntimeError,
                    format!("shim exited with {status} without writing {RESULT_FILE}\n{log}"),
                    req.seed,
                    start,
                ));
            }
        };
        let excerpt = if parsed.log_excerpt.trim().is_empty() { log } else { parsed.log_excerpt };
        if (parsed.status == SimStatus::Ok) != status.success() {
            return Ok(SimResult::failed(
                SimStatus::RuntimeError,
                format!("shim exit status {status} disagrees with reported status {:?}\n{excerpt}", parsed.status),
                req.seed,
                start,
            ));
        }
        if parsed.status != SimStatus::Ok {
            return Ok(SimResult::failed(parsed.status, excerpt, req.seed, start));
        }
        let video = match (parsed.video_path, parsed.frames, parsed.fps) {
            (Some(p), Some(frames), Some(fps)) if frames > 0 && fps > 0.0 => {
                let p = if p.is_relative() { dir.join(p) } else { p };
                if !p.is_file() {
                    return Ok(SimResult::failed(SimStatus::RuntimeError, format!("reported video {} does not exist", p.display()), req.seed, start));
                }
                VideoRef::new(p, frames, fps)
            }
            _ => {
                return Ok(SimResult::failed(SimStatus::RuntimeError, "ok result without video_path, frames and fps", req.seed, start));
            }
        };
        Ok(SimResult {
            status: SimStatus::Ok,
            video: Some(video),
            log_excerpt: excerpt,
            wall_time_s: start.elapsed().as_secs_f64(),
            seed: req.seed,
        })
    }
}

impl SimulatorBackend for ExternalSimulator {
    fn run(&self, req: &SimRequest) -> SimResult {
        let start = Instant::now();
        self.launch(req, start)
            .unwrap_or_else(|e| SimResult::failed(SimStatus::RuntimeError, e, req.seed, start))
    }
}

//! The `dashsim` command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dashsim_core::features::similarity;
use dashsim_core::{Diagnostic, FeatureId, FeatureVector, ScenicScript, ThresholdConfig};
use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::engine::{self, EngineError, MANIFEST, Outcome, RunState};
use crate::frames::FrameError;
use crate::setup::{self, SetupError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Gate = 1,
    Usage = 2,
    Pipeline = 3,
    Io = 4,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

#[derive(Debug, Parser)]
#[command(name = "dashsim", version, about = "Dashcam video to SCENIC scenario conversion")]
pub struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert one video into an accepted scenario script.
    Convert {
        video: PathBuf,
        /// Directory receiving the run directory (defaults to paths.runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a script against the catalog.
    Validate {
        script: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Compare two feature vector files.
    Similarity { features_a: PathBuf, features_b: PathBuf },
    /// Aggregate run directories. Accepts run directories, directories of
    /// runs and glob patterns.
    Report {
        #[arg(required = true)]
        runs: Vec<String>,
    },
    /// Simulate an accepted run's script under further seeds.
    Variations {
        run_dir: PathBuf,
        #[arg(long)]
        count: usize,
    },
    /// Continue an interrupted run.
    Resume { run_dir: PathBuf },
    /// Convert several videos, a few at a time.
    Batch {
        #[arg(required = true)]
        videos: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent runs (defaults to loop.batch_parallelism).
        #[arg(long)]
        parallel: Option<usize>,
    },
}

struct Failure {
    exit: Exit,
    message: String,
}

fn fail(exit: Exit, message: impl Into<String>) -> Failure {
    Failure { exit, message: message.into() }
}

impl From<SetupError> for Failure {
    fn from(e: SetupError) -> Self {
        let exit = match e {
            SetupError::Gateway(_) => Exit::Pipeline,
            _ => Exit::Usage,
        };
        fail(exit, e.to_string())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let exit = match &e {
            EngineError::Manifest { .. } | EngineError::Io { .. } => Exit::Io,
            EngineError::Frames(FrameError::Io(_)) => Exit::Io,
            EngineError::Frames(_) | EngineError::NotAccepted(_) => Exit::Pipeline,
            EngineError::Usage(_) => Exit::Usage,
        };
        fail(exit, e.to_string())
    }
}

/// Prints `value` as JSON or `human`, both derived from the same value.
fn emit<T: Serialize>(json: bool, value: &T, human: impl FnOnce(&T) -> String) {
    if json {
        println!("{}", serde_json::to_string(value).expect("output serializes"));
    } else {
        print!("{}", human(value));
    }
}

pub fn main() -> ExitCode {
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::Usage.into() } else { Exit::Ok.into() };
        }
    };
    run(cli).into()
}

pub fn run(cli: Cli) -> Exit {
    match dispatch(&cli) {
        Ok(exit) => exit,
        Err(f) => {
            if cli.json {
                println!("{}", json!({"error": f.message, "exit_code": f.exit as u8}));
            }
            eprintln!("error: {}", f.message);
            f.exit
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    PipelineConfig::load(cli.config.as_deref(), std::env::vars()).map_err(|e| fail(Exit::Usage, e.to_string()))
}

fn env_lookup(var: &str) -> Option<String> {
    std::env::var(var).ok()
}

fn dispatch(cli: &Cli) -> Result<Exit, Failure> {
    match &cli.command {
        Command::Convert { video, out } => convert(cli, video, out.as_deref()),
        Command::Validate { script, catalog } => validate(cli, script, catalog.as_deref()),
        Command::Similarity { features_a, features_b } => similarity_cmd(cli, features_a, features_b),
        Command::Report { runs } => report(cli, runs),
        Command::Variations { run_dir, count } => variations(cli, run_dir, *count),
        Command::Resume { run_dir } => resume(cli, run_dir),
        Command::Batch { videos, out, parallel } => batch(cli, videos, out.as_deref(), *parallel),
    }
}

#[derive(Serialize)]
struct RunSummary {
    run_id: String,
    run_dir: PathBuf,
    outcome: Option<Outcome>,
    iterations: usize,
    failure: Option<String>,
}

impl RunSummary {
    fn new(dir: &Path, st: &RunState) -> Self {
        RunSummary {
            run_id: st.run_id.clone(),
            run_dir: dir.into(),
            outcome: st.outcome,
            iterations: st.iterations.len(),
            failure: st.failure.clone(),
        }
    }

    fn human(&self) -> String {
        let outcome = self.outcome.map_or("incomplete", Outcome::as_str);
        let mut s = format!("{outcome} after {} iteration(s)\nrun directory: {}\n", self.iterations, self.run_dir.display());
        if let Some(f) = &self.failure {
            s.push_str(&format!("reason: {f}\n"));
        }
        s
    }

    fn exit(&self) -> Exit {
        if self.outcome == Some(Outcome::Accepted) { Exit::Ok } else { Exit::Pipeline }
    }
}

fn convert(cli: &Cli, video: &Path, out: Option<&Path>) -> Result<Exit, Failure> {
    let cfg = load_config(cli)?;
    let setup = setup::build(cfg, env_lookup)?;
    if !video.is_file() {
        return Err(fail(Exit::Io, format!("{} is not a readable file", video.display())));
    }
    let runs = out.map(Path::to_path_buf).unwrap_or_else(|| setup.engine.config.paths.runs.clone());
    let (dir, state) = setup.engine.start(video, &runs)?;
    let summary = RunSummary::new(&dir, &state);
    emit(cli.json, &summary, RunSummary::human);
    Ok(summary.exit())
}

fn resume(cli: &Cli, dir: &Path) -> Result<Exit, Failure> {
    let state = RunState::load(dir)?;
    let cfg = match &cli.config {
        Some(_) => load_config(cli)?,
        None => state.config.clone(),
    };
    let setup = setup::build(cfg, env_lookup)?;
    let state = setup.engine.resume(dir)?;
    let summary = RunSummary::new(dir, &state);
    emit(cli.json, &summary, RunSummary::human);
    Ok(summary.exit())
}

fn batch(cli: &Cli, videos: &[PathBuf], out: Option<&Path>, parallel: Option<usize>) -> Result<Exit, Failure> {
    let cfg = load_config(cli)?;
    let setup = setup::build(cfg, env_lookup)?;
    if let Some(missing) = videos.iter().find(|v| !v.is_file()) {
        return Err(fail(Exit::Io, format!("{} is not a readable file", missing.display())));
    }
    if parallel == Some(0) {
        return Err(fail(Exit::Usage, "--parallel must be at least 1"));
    }
    let engine = &setup.engine;
    let runs = out.map(Path::to_path_buf).unwrap_or_else(|| engine.config.paths.runs.clone());
    let k = parallel.unwrap_or(engine.config.loop_.batch_parallelism);
    let results = engine.batch(videos, &runs, k);
    let mut rows = Vec::new();
    let mut all_accepted = true;
    for (video, r) in videos.iter().zip(results) {
        match r {
            Ok((dir, st)) => {
                all_accepted &= st.outcome == Some(Outcome::Accepted);
                rows.push(json!({"video": video, "run": RunSummary::new(&dir, &st)}));
            }
            Err(e) => {
                all_accepted = false;
                rows.push(json!({"video": video, "error": e.to_string()}));
            }
        }
    }
    emit(cli.json, &rows, |rows| {
        rows.iter()
            .map(|r| {
                let video = r["video"].as_str().unwrap_or_default();
                match r.get("run") {
                    Some(run) => format!(
                        "{video}: {} ({} iterations) {}\n",
                        run["outcome"].as_str().unwrap_or("incomplete"),
                        run["iterations"],
                        run["run_dir"].as_str().unwrap_or_default()
                    ),
                    None => format!("{video}: error: {}\n", r["error"].as_str().unwrap_or_default()),
                }
            })
            .collect()
    });
    Ok(if all_accepted { Exit::Ok } else { Exit::Pipeline })
}

fn variations(cli: &Cli, dir: &Path, count: usize) -> Result<Exit, Failure> {
    if count == 0 {
        return Err(fail(Exit::Usage, "--count must be at least 1"));
    }
    let state = RunState::load(dir)?;
    let cfg = match &cli.config {
        Some(_) => load_config(cli)?,
        None => state.config.clone(),
    };
    let setup = setup::build(cfg, env_lookup)?;
    let results = setup.engine.variations(dir, count)?;
    emit(cli.json, &results, |rs| {
        rs.iter()
            .map(|r| {
                let video = r.video.as_ref().map_or("-".into(), |v| v.path.display().to_string());
                format!("seed {}: {} {video}\n", r.seed, r.status.as_str())
            })
            .collect()
    });
    Ok(Exit::Ok)
}

fn validate(cli: &Cli, path: &Path, catalog: Option<&Path>) -> Result<Exit, Failure> {
    let source = fs::read_to_string(path).map_err(|e| fail(Exit::Io, format!("{}: {e}", path.display())))?;
    let catalog_path = match catalog {
        Some(c) => c.to_path_buf(),
        None => load_config(cli)?.paths.catalog,
    };
    let catalog = setup::load_catalog(&catalog_path).map_err(|e| fail(Exit::Usage, e.to_string()))?;
    let diags: Vec<Diagnostic> = match ScenicScript::parse(&source) {
        Ok(s) => s.validate(&catalog),
        Err(d) => d,
    };
    if cli.json {
        for d in &diags {
            println!("{}", serde_json::to_string(d).expect("diagnostic serializes"));
        }
    } else {
        for d in &diags {
            let sev = if d.is_error() { "error" } else { "warning" };
            print!("{}:{}:{}: {sev}[{}]: {}", path.display(), d.line, d.col, d.code, d.message);
            match &d.hint {
                Some(h) => println!(" (hint: {h})"),
                None => println!(),
            }
        }
        if diags.is_empty() {
            println!("{}: ok", path.display());
        }
    }
    Ok(if diags.iter().any(Diagnostic::is_error) { Exit::Gate } else { Exit::Ok })
}

fn read_vector(path: &Path) -> Result<FeatureVector, Failure> {
    let text = fs::read_to_string(path).map_err(|e| fail(Exit::Io, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fail(Exit::Usage, format!("{}: {e}", path.display())))
}

fn similarity_cmd(cli: &Cli, a: &Path, b: &Path) -> Result<Exit, Failure> {
    let thresholds = match &cli.config {
        Some(_) => load_config(cli)?.threshold_config().map_err(|e| fail(Exit::Usage, e.to_string()))?,
        None => ThresholdConfig::default(),
    };
    let (real, sim) = (read_vector(a)?, read_vector(b)?);
    let report = similarity(&real, &sim, &thresholds).map_err(|e| fail(Exit::Usage, e.to_string()))?;
    emit(cli.json, &report, |r| {
        let tax = thresholds.taxonomy();
        let width = tax.features.iter().map(|d| d.display_name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (i, f) in FeatureId::ALL.iter().enumerate() {
            let d = tax.get(*f);
            let bad = r.violations.iter().any(|v| v.feature == *f);
            s.push_str(&format!(
                "{:<width$}  gap {:+.3}  threshold {:.2}  {}\n",
                d.display_name,
                r.gaps[i],
                thresholds.threshold(*f),
                if bad { "VIOLATION" } else { "ok" }
            ));
        }
        s.push_str(if r.passed { "passed\n" } else { "failed\n" });
        s
    });
    Ok(if report.passed { Exit::Ok } else { Exit::Gate })
}

/// Run directories named by `patterns`.
pub fn expand_runs(patterns: &[String]) -> Result<Vec<PathBuf>, String> {
    let mut out = Vec::new();
    for pat in patterns {
        let paths: Vec<PathBuf> = if pat.contains(['*', '?', '[']) {
            glob::glob(pat)
                .map_err(|e| format!("bad pattern `{pat}`: {e}"))?
                .filter_map(Result::ok)
                .collect()
        } else {
            vec![PathBuf::from(pat)]
        };
        for p in paths {
            if p.join(MANIFEST).exists() || !p.is_dir() {
                out.push(p);
                continue;
            }
            let mut children: Vec<PathBuf> = fs::read_dir(&p)
                .map_err(|e| format!("{}: {e}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|c| c.is_dir())
                .collect();
            children.sort();
            out.extend(children);
        }
    }
    Ok(out)
}

fn report(cli: &Cli, patterns: &[String]) -> Result<Exit, Failure> {
    let dirs = expand_runs(patterns).map_err(|e| fail(Exit::Usage, e))?;
    let rep = engine::report(&dirs).map_err(|e| {
        let engine::ReportError::NoRuns { warnings } = &e;
        fail(Exit::Io, format!("{e}: {}", warnings.join("; ")))
    })?;
    emit(cli.json, &rep, |r| r.to_table());
    Ok(Exit::Ok)
}

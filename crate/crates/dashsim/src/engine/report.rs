use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::state::{Outcome, RunState, StageTimings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub total_runs: usize,
    pub accepted: usize,
    pub accepted_rate: f64,
    /// Runs per outcome; runs without one count as `incomplete`.
    pub outcomes: BTreeMap<String, usize>,
    /// Runs that needed two or more iterations.
    pub refined_runs: usize,
    /// `refined_runs / total_runs`.
    pub refinement_rate: f64,
    pub accepted_refined: usize,
    /// `accepted_refined / accepted`.
    pub accepted_refinement_rate: Option<f64>,
    pub mean_iterations_accepted: Option<f64>,
    pub mean_wall_time_accepted_s: Option<f64>,
    /// Mean stage timings over accepted runs.
    pub mean_stage_times_accepted: Option<StageTimings>,
    /// Mean non-blank lines of the final script of accepted runs.
    pub mean_script_lines: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no readable run directories ({} skipped)", .warnings.len())]
    NoRuns { warnings: Vec<String> },
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn report(run_dirs: &[PathBuf]) -> Result<AggregateReport, ReportError> {
    let mut runs = Vec::new();
    let mut warnings = Vec::new();
    for dir in run_dirs {
        match RunState::load(dir) {
            Ok(s) => runs.push(s),
            Err(e) => warnings.push(e.to_string()),
        }
    }
    if runs.is_empty() {
        return Err(ReportError::NoRuns { warnings });
    }

    let total = runs.len();
    let mut outcomes = BTreeMap::new();
    for r in &runs {
        let key = r.outcome.map_or("incomplete", Outcome::as_str);
        *outcomes.entry(key.to_string()).or_insert(0) += 1;
    }
    let accepted: Vec<&RunState> = runs.iter().filter(|r| r.outcome == Some(Outcome::Accepted)).collect();
    let refined_runs = runs.iter().filter(|r| r.iterations.len() >= 2).count();
    let accepted_refined = accepted.iter().filter(|r| r.iterations.len() >= 2).count();
    let stage_means = (!accepted.is_empty()).then(|| {
        let n = accepted.len() as f64;
        let mut t = StageTimings::default();
        for r in &accepted {
            t.add(&r.total_timings());
        }
        StageTimings { generate_s: t.generate_s / n, simulate_s: t.simulate_s / n, frames_s: t.frames_s / n, extract_s: t.extract_s / n }
    });

    Ok(AggregateReport {
        total_runs: total,
        accepted: accepted.len(),
        accepted_rate: accepted.len() as f64 / total as f64,
        outcomes,
        refined_runs,
        refinement_rate: refined_runs as f64 / total as f64,
        accepted_refined,
        accepted_refinement_rate: (!accepted.is_empty()).then(|| accepted_refined as f64 / accepted.len() as f64),
        mean_iterations_accepted: mean(accepted.iter().map(|r| r.iterations.len() as f64)),
        mean_wall_time_accepted_s: mean(accepted.iter().map(|r| r.wall_time_s)),
        mean_stage_times_accepted: stage_means,
        mean_script_lines: mean(accepted.iter().filter_map(|r| r.final_line_count()).map(|n| n as f64)),
        warnings,
    })
}

pub fn percent(rate: f64) -> String {
    format!("{:.1}%", rate * 100.0)
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "-".into(), f)
}

impl AggregateReport {
    /// Two aligned columns: metric and value.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("runs".into(), self.total_runs.to_string()),
            ("accepted".into(), format!("{} ({})", self.accepted, percent(self.accepted_rate))),
            ("refined (>=2 iterations)".into(), format!("{} ({})", self.refined_runs, percent(self.refinement_rate))),
            (
                "refined among accepted".into(),
                format!("{} ({})", self.accepted_refined, opt(self.accepted_refinement_rate, percent)),
            ),
            ("mean iterations (accepted)".into(), opt(self.mean_iterations_accepted, |v| format!("{v:.2}"))),
            ("mean wall time (accepted)".into(), opt(self.mean_wall_time_accepted_s, |v| format!("{v:.2}s"))),
            ("mean script lines (accepted)".into(), opt(self.mean_script_lines, |v| format!("{v:.1}"))),
        ];
        if let Some(t) = &self.mean_stage_times_accepted {
            for (name, v) in [
                ("generate", t.generate_s),
                ("simulate", t.simulate_s),
                ("frames", t.frames_s),
                ("extract", t.extract_s),
            ] {
                rows.push((format!("  mean {name} time"), format!("{v:.2}s")));
            }
        }
        for (outcome, n) in &self.outcomes {
            rows.push((format!("outcome {outcome}"), n.to_string()));
        }
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

//! Grid and path-count refinement against the closed form, under common
//! random numbers: every row sees the leading paths of one scenario set
//! simulated on the finest grid.

use std::path::Path;
use std::time::Instant;

use dbsde_core::closed_form::LyonCase;
use dbsde_core::scenario::ScenarioSet;
use dbsde_core::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::config::Experiment;
use crate::error::RunError;
use crate::runner::{execute_on, write_json};

/// Finest grid the study will simulate on.
const MAX_FINE_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleRow {
    pub steps: usize,
    pub paths: usize,
}

pub fn load_schedule(path: &Path) -> Result<Vec<ScheduleRow>, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| RunError::validation(format!("cannot parse {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub steps: usize,
    pub paths: usize,
    pub y0: f64,
    pub y0_se: f64,
    pub y0_cv: f64,
    pub y0_cv_se: f64,
    pub oracle: f64,
    /// `|Y₀ − oracle|` for the backward-induction `Y₀`.
    pub abs_error: f64,
    pub replication_rms: f64,
    pub replication_rms_se: f64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub rows: Vec<Row>,
    /// Each error is at most the previous one plus two combined standard
    /// errors.
    pub monotone_error: bool,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn convergence_study(
    exp: &Experiment,
    schedule: &[ScheduleRow],
) -> Result<ConvergenceReport, RunError> {
    LyonCase::from_model(&exp.params, &exp.model, &exp.measure, &exp.claim).map_err(|e| {
        RunError::validation(format!("convergence study needs a closed-form claim: {e}"))
    })?;
    if schedule.is_empty() {
        return Err(RunError::validation("schedule is empty"));
    }
    let size = exp.solver.basis.size(exp.params.dim());
    let mut errors = Vec::new();
    for row in schedule {
        if row.steps == 0 {
            errors.push("schedule: steps must be positive".to_string());
        }
        if row.paths < 10 * size {
            errors.push(format!(
                "schedule: {} paths for {size} basis functions, need at least {}",
                row.paths,
                10 * size
            ));
        }
    }
    if !errors.is_empty() {
        return Err(RunError::Validation(errors));
    }
    let fine_steps = schedule
        .iter()
        .fold(1, |acc, r| acc / gcd(acc, r.steps) * r.steps);
    if fine_steps > MAX_FINE_STEPS {
        return Err(RunError::validation(format!(
            "schedule: common refinement has {fine_steps} steps, limit is {MAX_FINE_STEPS}"
        )));
    }
    let horizon = exp.params.horizon();
    let fine = TimeGrid::uniform(horizon, fine_steps)?;
    let max_paths = schedule.iter().map(|r| r.paths).max().unwrap_or(0);
    let base = ScenarioSet::simulate(&exp.params, &exp.model, &fine, max_paths, exp.seed)?;

    let mut rows = Vec::with_capacity(schedule.len());
    for r in schedule {
        let start = Instant::now();
        let grid = TimeGrid::uniform(horizon, r.steps)?;
        let scenarios = base.restrict(&grid, r.paths, &exp.model)?;
        let row_exp = Experiment {
            grid,
            paths: r.paths,
            picard: false,
            ..exp.clone()
        };
        let s = execute_on(&row_exp, scenarios)?.summary;
        let oracle = s.oracle.as_ref().map(|o| o.y0).unwrap_or(f64::NAN);
        rows.push(Row {
            steps: r.steps,
            paths: r.paths,
            y0: s.y0.value,
            y0_se: s.y0.std_error,
            y0_cv: s.y0_cv.value,
            y0_cv_se: s.y0_cv.std_error,
            oracle,
            abs_error: (s.y0.value - oracle).abs(),
            replication_rms: s.replication.rms.value,
            replication_rms_se: s.replication.rms.std_error,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let monotone_error = rows
        .windows(2)
        .all(|w| w[1].abs_error <= w[0].abs_error + 2.0 * w[0].y0_se.hypot(w[1].y0_se));
    Ok(ConvergenceReport {
        name: exp.name.clone(),
        rows,
        monotone_error,
    })
}

/// Writes `convergence.csv` (with wall times) and `convergence.json`
/// (without, so that it is reproducible byte for byte).
pub fn write_report(report: &ConvergenceReport, dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let path = dir.join("convergence.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "steps",
        "paths",
        "y0",
        "y0_se",
        "y0_cv",
        "y0_cv_se",
        "oracle",
        "abs_error",
        "replication_rms",
        "replication_rms_se",
        "wall_seconds",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.steps.to_string(),
            r.paths.to_string(),
            r.y0.to_string(),
            r.y0_se.to_string(),
            r.y0_cv.to_string(),
            r.y0_cv_se.to_string(),
            r.oracle.to_string(),
            r.abs_error.to_string(),
            r.replication_rms.to_string(),
            r.replication_rms_se.to_string(),
            format!("{:.3}", r.wall_seconds),
        ])?;
    }
    w.flush().map_err(|e| RunError::io(&path, e))?;
    write_json(&dir.join("convergence.json"), report)
}

//! Single experiment: simulate, solve both ways, compare with the closed
//! form when there is one, hedge, and write the results.

use std::fs;
use std::path::Path;

use dbsde_core::bsde::{
    apriori_bound_check, apriori_gamma_threshold, picard_solve, solve_backward, step_residuals,
    y0_control_variate, y0_estimate, BsdeProblem, BsdeSolution, Driver, Estimate, ResidualStats,
};
use dbsde_core::claims::Payoff;
use dbsde_core::closed_form::{lyon_vs_solver, Discrepancy, LyonCase};
use dbsde_core::hedging::{
    defaultable_driver, extract_strategy, replicate_forward, zc_price_and_loadings, BranchStats,
    ReplicationReport,
};
use dbsde_core::scenario::ScenarioSet;
use dbsde_core::Error;
use serde::Serialize;

use crate::config::{Experiment, Format, OracleTolerance};
use crate::error::RunError;

/// Value with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Value {
    pub value: f64,
    pub std_error: f64,
}

impl From<Estimate> for Value {
    fn from(e: Estimate) -> Self {
        Self {
            value: e.mean,
            std_error: e.std_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub basis: String,
    /// Lipschitz constant `K = max(K₁, K₂)` of the driver.
    pub k: f64,
    /// Backward-induction `Y₀` with the standard error of the pathwise
    /// payoff-plus-driver sum.
    pub y0: Value,
    /// Same solution, martingale control variate estimate.
    pub y0_cv: Value,
    pub picard: Option<PicardSummary>,
    pub oracle: Option<OracleSummary>,
    pub replication: ReplicationSummary,
    pub apriori: AprioriSummary,
    pub zero_coupon: ZeroCouponSummary,
    pub stopped_convention: bool,
    /// Largest `|mean| / std_error` of the per-step solution residuals.
    pub residual_max_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardSummary {
    pub y0: Value,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    pub distances: Vec<f64>,
    pub relative: Vec<f64>,
    pub ratios: Vec<f64>,
    pub stopped_convention: bool,
    /// Backward minus Picard `Y₀`.
    pub difference: f64,
    pub combined_std_error: f64,
    /// `|difference| ≤ 2 combined_std_error`.
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub y0: f64,
    /// Control variate estimate minus the closed form.
    pub error: f64,
    pub rel_error: f64,
    pub tolerance_abs: f64,
    #[serde(rename = "match")]
    pub matches: bool,
    pub regression_error: f64,
    pub y_sup: f64,
    pub y_rms: f64,
    pub z_sup: f64,
    pub z_rms: f64,
    pub u_sup: f64,
    pub u_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub initial_wealth: f64,
    pub mean: Value,
    pub rms: Value,
    pub max_abs: f64,
    pub survival: BranchSummary,
    pub default: BranchSummary,
    pub decomposition_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchSummary {
    pub count: usize,
    pub mean: f64,
    pub rms: f64,
    pub max_abs: f64,
}

impl From<BranchStats> for BranchSummary {
    fn from(b: BranchStats) -> Self {
        Self {
            count: b.count,
            mean: b.mean,
            rms: b.rms,
            max_abs: b.max_abs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriSummary {
    pub gamma: f64,
    pub lhs: Value,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroCouponSummary {
    pub rho0: f64,
    pub no_arbitrage_gap: f64,
}

/// Everything a run produces, for writing or further inspection.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Summary,
    pub scenarios: ScenarioSet,
    pub solution: BsdeSolution,
    pub residuals: Vec<ResidualStats>,
}

pub fn basis_label(exp: &Experiment) -> String {
    match exp.solver.basis {
        dbsde_core::regression::Basis::Polynomial(d) => format!("polynomial({d})"),
        dbsde_core::regression::Basis::LinearSpline(k) => format!("spline({k})"),
    }
}

/// Absolute tolerance for `oracle.match`.
pub fn oracle_tolerance(tol: &OracleTolerance, payoff: Payoff, oracle: f64) -> f64 {
    match (tol.abs, tol.rel) {
        (None, None) => match payoff {
            Payoff::Constant(_) => 5e-3,
            _ => 0.01 * oracle.abs(),
        },
        (abs, rel) => abs.unwrap_or(0.0).max(rel.unwrap_or(0.0) * oracle.abs()),
    }
}

/// Solves the experiment on the scenarios it specifies.
pub fn execute(exp: &Experiment) -> Result<Outcome, RunError> {
    let scenarios = ScenarioSet::simulate(&exp.params, &exp.model, &exp.grid, exp.paths, exp.seed)?;
    execute_on(exp, scenarios)
}

/// Solves the experiment on given scenarios (which must use `exp.grid`).
pub fn execute_on(exp: &Experiment, scenarios: ScenarioSet) -> Result<Outcome, RunError> {
    let driver = defaultable_driver(&exp.params, &exp.model, &exp.measure)?;
    let problem = BsdeProblem {
        claim: &exp.claim,
        driver: &driver,
        intensity: &exp.model,
        grid: &exp.grid,
    };
    let solution = solve_backward(&problem, &scenarios, &exp.solver)?;
    let y0 = y0_estimate(&problem, &solution, &scenarios);
    let y0_cv = y0_control_variate(&problem, &solution, &scenarios);

    let picard = if exp.picard {
        let out = picard_solve(&problem, &scenarios, &exp.solver)?;
        let est = y0_estimate(&problem, &out.solution, &scenarios);
        let difference = y0.mean - est.mean;
        let combined = y0.std_error.hypot(est.std_error);
        Some(PicardSummary {
            y0: est.into(),
            gamma: out.gamma,
            iterations: out.iterations(),
            converged: out.converged,
            ratios: out.ratios(),
            stopped_convention: out
                .solution
                .satisfies_stopped_convention(&exp.claim, &scenarios),
            distances: out.distances,
            relative: out.relative,
            difference,
            combined_std_error: combined,
            agree: difference.abs() <= 2.0 * combined,
        })
    } else {
        None
    };

    let oracle = match LyonCase::from_model(&exp.params, &exp.model, &exp.measure, &exp.claim) {
        Ok(case) => {
            let d = lyon_vs_solver(&case, &solution, &scenarios)?;
            Some(oracle_summary(&d, y0_cv, exp))
        }
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };

    let zc = zc_price_and_loadings(&exp.params, &exp.model, &exp.measure, &exp.grid)?;
    let strategy = extract_strategy(&solution, &scenarios, &zc, &exp.params)?;
    let report = replicate_forward(&strategy, &scenarios, &zc, &exp.params, &exp.claim)?;
    let decomposition = strategy.decomposition_residual(&solution, &scenarios, &zc, &exp.params);

    let gamma = apriori_gamma_threshold(driver.constant()) + 0.1;
    let bound = apriori_bound_check(&problem, &solution, &scenarios, gamma)?;
    let residuals = step_residuals(&problem, &solution, &scenarios);
    let residual_max_score = residuals
        .iter()
        .filter(|r| r.std_error > 0.0)
        .map(|r| r.mean.abs() / r.std_error)
        .fold(0.0, f64::max);

    let summary = Summary {
        schema_version: crate::config::SCHEMA_VERSION,
        name: exp.name.clone(),
        paths: exp.paths,
        steps: exp.grid.steps(),
        seed: exp.seed,
        basis: basis_label(exp),
        k: driver.constant(),
        y0: Value {
            value: solution.y0(),
            std_error: y0.std_error,
        },
        y0_cv: y0_cv.into(),
        picard,
        oracle,
        replication: replication_summary(&report, decomposition),
        apriori: AprioriSummary {
            gamma,
            lhs: Value {
                value: bound.lhs,
                std_error: bound.lhs_se,
            },
            rhs: bound.rhs,
            satisfied: bound.satisfied,
        },
        zero_coupon: ZeroCouponSummary {
            rho0: zc.rho_pre(0),
            no_arbitrage_gap: zc.no_arbitrage_gap(),
        },
        stopped_convention: solution.satisfies_stopped_convention(&exp.claim, &scenarios),
        residual_max_score,
    };
    Ok(Outcome {
        summary,
        scenarios,
        solution,
        residuals,
    })
}

fn oracle_summary(d: &Discrepancy, cv: Estimate, exp: &Experiment) -> OracleSummary {
    let error = cv.mean - d.y0_oracle;
    let tolerance_abs = oracle_tolerance(&exp.tolerance, exp.claim.payoff(), d.y0_oracle);
    OracleSummary {
        y0: d.y0_oracle,
        error,
        rel_error: if d.y0_oracle != 0.0 {
            error.abs() / d.y0_oracle.abs()
        } else {
            error.abs()
        },
        tolerance_abs,
        matches: error.abs() <= tolerance_abs,
        regression_error: d.y0_solver - d.y0_oracle,
        y_sup: d.y_sup,
        y_rms: d.y_rms,
        z_sup: d.z_sup,
        z_rms: d.z_rms,
        u_sup: d.u_sup,
        u_rms: d.u_rms,
    }
}

pub fn replication_summary(report: &ReplicationReport, decomposition: f64) -> ReplicationSummary {
    ReplicationSummary {
        initial_wealth: report.initial_wealth,
        mean: Value {
            value: report.mean,
            std_error: report.mean_se,
        },
        rms: Value {
            value: report.rms,
            std_error: report.rms_se,
        },
        max_abs: report.max_abs,
        survival: report.survival.into(),
        default: report.default.into(),
        decomposition_residual: decomposition,
    }
}

/// Writes `summary.json`, and `nodes.csv` / `paths.csv` when requested.
pub fn write_outcome(exp: &Experiment, outcome: &Outcome, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    if exp.outputs.formats.contains(&Format::Json) {
        write_json(&dir.join("summary.json"), &outcome.summary)?;
    }
    if exp.outputs.formats.contains(&Format::Csv) {
        write_nodes(&dir.join("nodes.csv"), exp, outcome)?;
        if exp.outputs.path_rows > 0 {
            write_paths(&dir.join("paths.csv"), exp, outcome)?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries serialise");
    text.push('\n');
    fs::write(path, text).map_err(|e| RunError::io(path, e))
}

fn write_nodes(path: &Path, exp: &Experiment, outcome: &Outcome) -> Result<(), RunError> {
    let (sc, sol) = (&outcome.scenarios, &outcome.solution);
    let m = sol.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "node".to_string(),
        "t".into(),
        "alive".into(),
        "y_mean".into(),
        "y_se".into(),
    ];
    header.extend((0..m).map(|i| format!("z{i}_mean")));
    header.extend(["u_mean", "residual_mean", "residual_se"].map(String::from));
    w.write_record(&header)?;
    for k in 0..exp.grid.steps() {
        let alive: Vec<usize> = (0..sc.n_paths()).filter(|&p| sc.alive(p, k)).collect();
        let ys: Vec<f64> = alive.iter().map(|&p| sol.y(p, k)).collect();
        let y = Estimate::from_samples(&ys);
        let count = alive.len().max(1) as f64;
        let mut row = vec![
            k.to_string(),
            exp.grid.time(k).to_string(),
            alive.len().to_string(),
        ];
        row.push(y.mean.to_string());
        row.push(y.std_error.to_string());
        for i in 0..m {
            row.push((alive.iter().map(|&p| sol.z(p, k)[i]).sum::<f64>() / count).to_string());
        }
        row.push((alive.iter().map(|&p| sol.u(p, k)).sum::<f64>() / count).to_string());
        let r = &outcome.residuals[k];
        row.push(r.mean.to_string());
        row.push(r.std_error.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

fn write_paths(path: &Path, exp: &Experiment, outcome: &Outcome) -> Result<(), RunError> {
    let (sc, sol) = (&outcome.scenarios, &outcome.solution);
    let m = sol.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "path".to_string(),
        "node".into(),
        "t".into(),
        "alive".into(),
        "y".into(),
    ];
    header.extend((0..m).map(|i| format!("z{i}")));
    header.push("u".into());
    w.write_record(&header)?;
    for p in 0..exp.outputs.path_rows.min(sc.n_paths()) {
        for k in 0..=exp.grid.steps() {
            let mut row = vec![
                p.to_string(),
                k.to_string(),
                exp.grid.time(k).to_string(),
                (sc.alive(p, k) as u8).to_string(),
                sol.y(p, k).to_string(),
            ];
            row.extend(sol.z(p, k).iter().map(|z| z.to_string()));
            row.push(sol.u(p, k).to_string());
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

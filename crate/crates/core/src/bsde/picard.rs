use alloc::vec::Vec;

use super::backward::{estimate_z, step_weights};
use super::solution::PreDefault;
use super::{contraction_gamma, BsdeProblem, BsdeSolution, SolverConfig};
use crate::math::{exp, sq, sqrt};
use crate::regression::{Basis, Projector};
use crate::scenario::ScenarioSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutcome {
    pub solution: BsdeSolution,
    /// `|||Φ(xⁿ) − xⁿ|||_γ` for each evaluation of the map.
    pub distances: Vec<f64>,
    /// Distances relative to the norm of the newer iterate.
    pub relative: Vec<f64>,
    pub gamma: f64,
    pub converged: bool,
}

impl PicardOutcome {
    /// Number of evaluations of the map.
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    /// `d_{n+1} / d_n`; zero when `d_n` is zero.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }
}

/// Picard iteration of the solution map started from `(0, 0, 0)`.
///
/// Each pass regresses the accumulated target
/// `G_k = f(t_k, yⁿ_k, zⁿ_k, uⁿ_k) Δt_k + E[C_τ 1{τ ≤ t_{k+1}} | τ > t_k] + p_k G_{k+1}`,
/// `G_N = V`, on the log-prices. Stops once the relative γ-distance between
/// iterates falls below the tolerance, and fails with
/// [`Error::Divergence`] after three consecutive non-decreasing distances.
pub fn picard_solve(
    problem: &BsdeProblem<'_>,
    scenarios: &ScenarioSet,
    cfg: &SolverConfig,
) -> Result<PicardOutcome> {
    problem.check(scenarios)?;
    let grid = problem.grid;
    let n = scenarios.n_paths();
    let m = scenarios.dim();
    let nodes = grid.steps() + 1;
    let gamma = cfg
        .picard
        .gamma
        .unwrap_or_else(|| contraction_gamma(problem.driver.constant()));
    let weights = step_weights(problem);
    let terminal: Vec<f64> = (0..n)
        .map(|path| problem.claim.survival_value(scenarios.terminal_spot(path)))
        .collect();

    let mut current = PreDefault::zeros(n, nodes, m);
    let zero = PreDefault::zeros(n, nodes, m);
    let mut distances = Vec::new();
    let mut relative = Vec::new();
    let mut converged = false;
    let mut rising = 0;
    for _ in 0..cfg.picard.max_iters.max(1) {
        let next = apply_map(
            problem, scenarios, &cfg.basis, &weights, &terminal, &current, cfg.ridge,
        )?;
        let d = distance(scenarios, problem, gamma, &next, &current);
        let norm = distance(scenarios, problem, gamma, &next, &zero);
        let rel = if norm > 0.0 { d / norm } else { 0.0 };
        if let Some(&last) = distances.last() {
            rising = if d >= last && d > 0.0 { rising + 1 } else { 0 };
        }
        distances.push(d);
        relative.push(rel);
        current = next;
        if d == 0.0 || rel < cfg.picard.tolerance {
            converged = true;
            break;
        }
        if rising >= 3 {
            return Err(Error::Divergence(distances));
        }
    }
    Ok(PicardOutcome {
        solution: BsdeSolution::stop(current, problem.claim, scenarios),
        distances,
        relative,
        gamma,
        converged,
    })
}

fn apply_map(
    problem: &BsdeProblem<'_>,
    scenarios: &ScenarioSet,
    basis: &Basis,
    weights: &[(f64, f64)],
    terminal: &[f64],
    prev: &PreDefault,
    ridge: f64,
) -> Result<PreDefault> {
    let grid = problem.grid;
    let n = scenarios.n_paths();
    let m = scenarios.dim();
    let steps = grid.steps();
    let nodes = steps + 1;
    let mut out = PreDefault::zeros(n, nodes, m);
    let mut target = terminal.to_vec();
    let mut next = terminal.to_vec();
    for (path, v) in terminal.iter().enumerate() {
        out.y[path * nodes + steps] = *v;
    }
    let mut features = Vec::new();
    let mut scratch = Vec::with_capacity(n);
    for k in (0..steps).rev() {
        let (p, leg) = weights[k];
        let t = grid.time(k);
        let dt = grid.dt(k);
        let c_t = problem.claim.compensation(t);
        for (path, g) in target.iter_mut().enumerate() {
            let idx = path * nodes + k;
            let f = problem.driver.eval(
                t,
                prev.y[idx],
                &prev.z[idx * m..(idx + 1) * m],
                prev.u[idx],
                true,
            );
            *g = f * dt + leg + p * *g;
        }
        scenarios.log_state(k, &mut features);
        let projector = Projector::new(basis, m, &features, n, ridge)?;
        let y = projector.fit(&target);
        let cont = projector.fit(&next);
        estimate_z(
            &projector,
            scenarios,
            k,
            &next,
            &cont,
            p,
            ridge,
            &mut out.z,
            &mut scratch,
        )?;
        for (path, v) in y.iter().enumerate() {
            let idx = path * nodes + k;
            out.y[idx] = *v;
            out.u[idx] = c_t - v;
        }
        next = y;
    }
    Ok(out)
}

/// γ-distance between two pre-default iterates over the pre-default nodes.
fn distance(
    scenarios: &ScenarioSet,
    problem: &BsdeProblem<'_>,
    gamma: f64,
    a: &PreDefault,
    b: &PreDefault,
) -> f64 {
    let grid = problem.grid;
    let n = scenarios.n_paths();
    let m = scenarios.dim();
    let nodes = grid.steps() + 1;
    let weights: Vec<(f64, f64)> = (0..grid.steps())
        .map(|k| {
            (
                exp(gamma * grid.time(k)) * grid.dt(k),
                problem.intensity.intensity(grid.time(k)),
            )
        })
        .collect();
    let mut total = 0.0;
    for path in 0..n {
        for (k, &(w, lambda)) in weights.iter().enumerate() {
            if !scenarios.alive(path, k) {
                break;
            }
            let idx = path * nodes + k;
            let dy = a.y[idx] - b.y[idx];
            let du = a.u[idx] - b.u[idx];
            let dz: f64 = (0..m)
                .map(|j| sq(a.z[idx * m + j] - b.z[idx * m + j]))
                .sum();
            total += w * (dy * dy + dz + lambda * du * du);
        }
    }
    sqrt(total / n as f64)
}

use alloc::vec;
use alloc::vec::Vec;

use super::solution::PreDefault;
use super::{BsdeProblem, BsdeSolution, SolverConfig};
use crate::regression::Projector;
use crate::scenario::ScenarioSet;
use crate::Result;

/// Per-step survival probability `p_k` and default leg
/// `E[C_τ 1{τ ≤ t_{k+1}} | τ > t_k]`.
pub(crate) fn step_weights(problem: &BsdeProblem<'_>) -> Vec<(f64, f64)> {
    let grid = problem.grid;
    (0..grid.steps())
        .map(|k| {
            let (a, b) = (grid.time(k), grid.time(k + 1));
            (
                problem.intensity.conditional_survival(a, b),
                problem.claim.expected_compensation(problem.intensity, a, b),
            )
        })
        .collect()
}

/// `Z_k = p_k g(X_k)`, where `g` is fitted by regressing
/// `Y_{k+1} − E[Y_{k+1} | X_k]` on the basis times `ΔW_k`, written into `z`
/// at node `k`.
pub(crate) fn estimate_z(
    projector: &Projector,
    scenarios: &ScenarioSet,
    k: usize,
    next: &[f64],
    cont: &[f64],
    p: f64,
    ridge: f64,
    z: &mut [f64],
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let n = scenarios.n_paths();
    let m = scenarios.dim();
    let nodes = scenarios.grid().steps() + 1;
    let residual: Vec<f64> = next.iter().zip(cont).map(|(a, b)| a - b).collect();
    for j in 0..m {
        scratch.clear();
        scratch.extend((0..n).map(|path| scenarios.dw(path, k)[j]));
        let slope = projector.fit_slope(&residual, scratch, ridge)?;
        for (path, v) in slope.into_iter().enumerate() {
            z[(path * nodes + k) * m + j] = p * v;
        }
    }
    Ok(())
}

/// Backward induction with regression on the log-prices.
///
/// At each step the pre-default value is
/// `Y_k = c + f(t_k, Y_k, Z_k, C(t_k) − Y_k) Δt` with
/// `c = p_k E[Y_{k+1} | X_k] + E[C_τ 1{τ ≤ t_{k+1}} | τ > t_k]`, resolved by an
/// explicit predictor and one corrector pass.
pub fn solve_backward(
    problem: &BsdeProblem<'_>,
    scenarios: &ScenarioSet,
    cfg: &SolverConfig,
) -> Result<BsdeSolution> {
    problem.check(scenarios)?;
    let grid = problem.grid;
    let n = scenarios.n_paths();
    let m = scenarios.dim();
    let steps = grid.steps();
    let nodes = steps + 1;
    let weights = step_weights(problem);

    let mut pre = PreDefault::zeros(n, nodes, m);
    let mut next: Vec<f64> = (0..n)
        .map(|path| problem.claim.survival_value(scenarios.terminal_spot(path)))
        .collect();
    for (path, v) in next.iter().enumerate() {
        pre.y[path * nodes + steps] = *v;
    }

    let mut features = Vec::new();
    let mut scratch = Vec::with_capacity(n);
    let mut current = vec![0.0; n];
    for k in (0..steps).rev() {
        scenarios.log_state(k, &mut features);
        let projector = Projector::new(&cfg.basis, m, &features, n, cfg.ridge)?;
        let (p, leg) = weights[k];
        let t = grid.time(k);
        let dt = grid.dt(k);
        let c_t = problem.claim.compensation(t);

        let cont = projector.fit(&next);
        estimate_z(
            &projector,
            scenarios,
            k,
            &next,
            &cont,
            p,
            cfg.ridge,
            &mut pre.z,
            &mut scratch,
        )?;
        for path in 0..n {
            let idx = path * nodes + k;
            let z = &pre.z[idx * m..(idx + 1) * m];
            let cond = p * cont[path] + leg;
            let y0 = cond + problem.driver.eval(t, cond, z, c_t - cond, true) * dt;
            let y1 = cond + problem.driver.eval(t, y0, z, c_t - y0, true) * dt;
            pre.y[idx] = y1;
            pre.u[idx] = c_t - y1;
            current[path] = y1;
        }
        core::mem::swap(&mut next, &mut current);
    }
    Ok(BsdeSolution::stop(pre, problem.claim, scenarios))
}

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Driver;
use crate::claims::PayoffSpec;
use crate::default_model::IntensityModel;
use crate::grid::TimeGrid;
use crate::regression::Basis;
use crate::scenario::ScenarioSet;
use crate::{Error, Result};

/// Claim, driver and intensity of one BSDE, on a grid.
#[derive(Clone, Copy)]
pub struct BsdeProblem<'a> {
    pub claim: &'a PayoffSpec,
    pub driver: &'a dyn Driver,
    pub intensity: &'a IntensityModel,
    pub grid: &'a TimeGrid,
}

impl core::fmt::Debug for BsdeProblem<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BsdeProblem")
            .field("claim", self.claim)
            .field("intensity", self.intensity)
            .field("grid", self.grid)
            .finish_non_exhaustive()
    }
}

impl BsdeProblem<'_> {
    /// Shape and integrability checks shared by the solvers.
    pub(crate) fn check(&self, scenarios: &ScenarioSet) -> Result<()> {
        if scenarios.grid() != self.grid {
            return Err(Error::Mismatch(
                "scenarios were simulated on a different grid".into(),
            ));
        }
        if self.claim.underlying() >= scenarios.dim() {
            return Err(Error::Mismatch(format!(
                "claim is written on asset {} but scenarios have {} assets",
                self.claim.underlying(),
                scenarios.dim()
            )));
        }
        let k = self.driver.constant();
        let step = self.grid.max_dt() * k;
        if step >= 1.0 {
            return Err(Error::StepSize(step));
        }
        let z0 = vec![0.0; scenarios.dim()];
        for path in 0..scenarios.n_paths() {
            if !self.claim.terminal_payoff(scenarios, path).is_finite() {
                return Err(Error::NonIntegrable(format!(
                    "terminal value is not finite on path {path}"
                )));
            }
        }
        for k in 0..self.grid.steps() {
            if !self
                .driver
                .eval(self.grid.time(k), 0.0, &z0, 0.0, true)
                .is_finite()
            {
                return Err(Error::NonIntegrable(format!(
                    "f(t,0,0,0) is not finite at node {k}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub max_iters: usize,
    /// Stop when the γ-distance between iterates, relative to the norm of the
    /// newest iterate, falls below this.
    pub tolerance: f64,
    /// Norm weight; `None` means `4K² + 2K + 1`.
    pub gamma: Option<f64>,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tolerance: 1e-4,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Regression basis in the log-prices.
    pub basis: Basis,
    /// Relative ridge level used when the regression design is near-collinear.
    pub ridge: f64,
    pub picard: PicardConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            basis: Basis::Polynomial(4),
            ridge: 1e-8,
            picard: PicardConfig::default(),
        }
    }
}

/// `(Y, Z, U)` per path and node, stopped after `T ∧ τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsdeSolution {
    n_paths: usize,
    nodes: usize,
    dim: usize,
    y: Vec<f64>,
    z: Vec<f64>,
    u: Vec<f64>,
}

/// Pre-default values on every path and node, before stopping.
#[derive(Debug, Clone)]
pub(crate) struct PreDefault {
    pub(crate) y: Vec<f64>,
    pub(crate) z: Vec<f64>,
    pub(crate) u: Vec<f64>,
}

impl PreDefault {
    pub(crate) fn zeros(n_paths: usize, nodes: usize, dim: usize) -> Self {
        Self {
            y: vec![0.0; n_paths * nodes],
            z: vec![0.0; n_paths * nodes * dim],
            u: vec![0.0; n_paths * nodes],
        }
    }
}

impl BsdeSolution {
    /// Builds a solution from raw `[path][node]` (and `[path][node][asset]`
    /// for `Z`) arrays.
    pub fn from_raw(
        n_paths: usize,
        nodes: usize,
        dim: usize,
        y: Vec<f64>,
        z: Vec<f64>,
        u: Vec<f64>,
    ) -> Result<Self> {
        if y.len() != n_paths * nodes
            || u.len() != n_paths * nodes
            || z.len() != n_paths * nodes * dim
        {
            return Err(Error::Mismatch(
                "solution arrays have inconsistent lengths".into(),
            ));
        }
        Ok(Self {
            n_paths,
            nodes,
            dim,
            y,
            z,
            u,
        })
    }

    /// Applies the stopped convention to pre-default values.
    pub(crate) fn stop(pre: PreDefault, claim: &PayoffSpec, scenarios: &ScenarioSet) -> Self {
        let n = scenarios.n_paths();
        let nodes = scenarios.grid().steps() + 1;
        let m = scenarios.dim();
        let PreDefault {
            mut y,
            mut z,
            mut u,
        } = pre;
        for path in 0..n {
            let xi = claim.terminal_payoff(scenarios, path);
            for k in 0..nodes {
                if k + 1 == nodes || !scenarios.alive(path, k) {
                    let idx = path * nodes + k;
                    y[idx] = xi;
                    u[idx] = 0.0;
                    z[idx * m..(idx + 1) * m].fill(0.0);
                }
            }
        }
        Self {
            n_paths: n,
            nodes,
            dim: m,
            y,
            z,
            u,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn y(&self, path: usize, node: usize) -> f64 {
        self.y[path * self.nodes + node]
    }

    #[inline]
    pub fn z(&self, path: usize, node: usize) -> &[f64] {
        let idx = path * self.nodes + node;
        &self.z[idx * self.dim..(idx + 1) * self.dim]
    }

    #[inline]
    pub fn u(&self, path: usize, node: usize) -> f64 {
        self.u[path * self.nodes + node]
    }

    /// `Y_0`, common to all paths.
    pub fn y0(&self) -> f64 {
        self.y[0]
    }

    /// Whether `Y = ξ`, `Z = 0`, `U = 0` holds exactly on every node with
    /// `t_k ≥ T ∧ τ`.
    pub fn satisfies_stopped_convention(
        &self,
        claim: &PayoffSpec,
        scenarios: &ScenarioSet,
    ) -> bool {
        (0..self.n_paths).all(|path| {
            let xi = claim.terminal_payoff(scenarios, path);
            (0..self.nodes)
                .filter(|&k| k + 1 == self.nodes || !scenarios.alive(path, k))
                .all(|k| {
                    self.y(path, k) == xi
                        && self.u(path, k) == 0.0
                        && self.z(path, k).iter().all(|v| *v == 0.0)
                })
        })
    }

    pub fn is_identically_zero(&self) -> bool {
        self.y
            .iter()
            .chain(&self.z)
            .chain(&self.u)
            .all(|v| *v == 0.0)
    }
}

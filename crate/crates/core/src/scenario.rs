//! Joint Brownian/default scenarios on a time grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::default_model::{DefaultPaths, IntensityModel};
use crate::grid::TimeGrid;
use crate::linalg::dot;
use crate::market::{AssetPaths, MarketParams};
use crate::math::{exp, ln, sqrt};
use crate::rng::{path_rng, Stream};
use crate::{Error, Result};

/// Everything the solvers and the replication need about a path set: asset
/// prices and Brownian increments at the nodes, default times with `H` and
/// `ΔM`, and the asset price at the exact default time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    grid: TimeGrid,
    assets: AssetPaths,
    defaults: DefaultPaths,
    /// `S_τ` for paths defaulting before `T`, NaN otherwise; `[path][asset]`.
    default_spot: Vec<f64>,
}

impl ScenarioSet {
    /// Simulates assets and default clocks with independent streams, then
    /// samples `S_τ` from the Brownian bridge of the step containing `τ`.
    pub fn simulate(
        params: &MarketParams,
        intensity: &IntensityModel,
        grid: &TimeGrid,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        let assets = params.simulate_assets(grid, n_paths, seed)?;
        let defaults = intensity.sample_default(grid, n_paths, seed)?;
        let default_spot = bridge_default_spot(params, grid, &assets, &defaults, seed);
        Ok(Self {
            grid: grid.clone(),
            assets,
            defaults,
            default_spot,
        })
    }

    /// Assembles a scenario set from pre-built parts.
    pub fn from_parts(
        grid: TimeGrid,
        assets: AssetPaths,
        defaults: DefaultPaths,
        default_spot: Vec<f64>,
    ) -> Result<Self> {
        let nodes = grid.steps() + 1;
        if assets.nodes() != nodes || defaults.nodes() != nodes {
            return Err(Error::Mismatch(
                "scenario parts do not match the grid".into(),
            ));
        }
        if assets.n_paths() != defaults.n_paths()
            || default_spot.len() != assets.n_paths() * assets.dim()
        {
            return Err(Error::Mismatch(
                "scenario parts have different path counts".into(),
            ));
        }
        Ok(Self {
            grid,
            assets,
            defaults,
            default_spot,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.assets.n_paths()
    }

    pub fn dim(&self) -> usize {
        self.assets.dim()
    }

    pub fn assets(&self) -> &AssetPaths {
        &self.assets
    }

    pub fn defaults(&self) -> &DefaultPaths {
        &self.defaults
    }

    #[inline]
    pub fn spot(&self, path: usize, node: usize) -> &[f64] {
        self.assets.spot(path, node)
    }

    #[inline]
    pub fn dw(&self, path: usize, step: usize) -> &[f64] {
        self.assets.increment(path, step)
    }

    #[inline]
    pub fn dm(&self, path: usize, step: usize) -> f64 {
        self.defaults.dm(path, step)
    }

    #[inline]
    pub fn tau(&self, path: usize) -> f64 {
        self.defaults.tau(path)
    }

    /// `t_k < τ` on this path.
    #[inline]
    pub fn alive(&self, path: usize, node: usize) -> bool {
        self.defaults.alive(path, node)
    }

    pub fn terminal_spot(&self, path: usize) -> &[f64] {
        self.assets.spot(path, self.grid.steps())
    }

    /// `S_τ` for a path that defaults before the horizon.
    pub fn default_spot(&self, path: usize) -> Option<&[f64]> {
        let m = self.dim();
        let s = &self.default_spot[path * m..(path + 1) * m];
        self.tau(path).is_finite().then_some(s)
    }

    /// Same scenarios seen on a coarser grid (whose nodes are fine-grid
    /// nodes), keeping the first `n_paths` paths. Brownian increments are
    /// summed, default times and `S_τ` are kept, `H` and `ΔM` are rebuilt.
    /// This gives common random numbers across grid refinements.
    pub fn restrict(
        &self,
        coarse: &TimeGrid,
        n_paths: usize,
        intensity: &IntensityModel,
    ) -> Result<Self> {
        let node_map = coarse.embed_in(&self.grid).ok_or_else(|| {
            Error::Mismatch("coarse grid nodes must be nodes of the fine grid".into())
        })?;
        if coarse.horizon() != self.grid.horizon() {
            return Err(Error::Mismatch("grids have different horizons".into()));
        }
        if n_paths > self.n_paths() {
            return Err(Error::Mismatch(format!(
                "requested {n_paths} paths from a set of {}",
                self.n_paths()
            )));
        }
        coarse.check_breakpoints(intensity.schedule().breakpoints())?;
        let assets = self.assets.restrict(&node_map, n_paths);
        let defaults = DefaultPaths::from_times(
            intensity,
            coarse,
            self.defaults.default_times()[..n_paths].to_vec(),
        );
        let default_spot = self.default_spot[..n_paths * self.dim()].to_vec();
        Ok(Self {
            grid: coarse.clone(),
            assets,
            defaults,
            default_spot,
        })
    }

    /// Log-prices at a node, written into `out` as `[path][asset]`.
    pub(crate) fn log_state(&self, node: usize, out: &mut Vec<f64>) {
        out.clear();
        for path in 0..self.n_paths() {
            out.extend(self.spot(path, node).iter().map(|s| ln(*s)));
        }
    }
}

fn bridge_default_spot(
    params: &MarketParams,
    grid: &TimeGrid,
    assets: &AssetPaths,
    defaults: &DefaultPaths,
    seed: u64,
) -> Vec<f64> {
    let m = assets.dim();
    let coeffs = params.step_coefficients(grid);
    let mut out = vec![f64::NAN; assets.n_paths() * m];
    let mut w = vec![0.0; m];
    for path in 0..assets.n_paths() {
        let tau = defaults.tau(path);
        let Some(k) = grid.step_containing(tau) else {
            continue;
        };
        let dt = grid.dt(k);
        let frac = (tau - grid.time(k)) / dt;
        let spread = sqrt(frac * (1.0 - frac) * dt);
        let mut rng = path_rng(seed, Stream::Bridge, path);
        for (j, wj) in w.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *wj = frac * assets.increment(path, k)[j] + spread * z;
        }
        let (log_drift, sigma) = &coeffs[k];
        for i in 0..m {
            let log_s = ln(assets.spot(path, k)[i])
                + log_drift[i] * (tau - grid.time(k))
                + dot(sigma.row(i), &w);
            out[path * m + i] = exp(log_s);
        }
    }
    out
}

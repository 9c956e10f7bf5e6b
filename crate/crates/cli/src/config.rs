//! Experiment configuration: a versioned JSON document.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "market": { "horizon": 1.0, "rate": 0.0, "drift": [0.0],
//!               "volatility": [[0.2]], "spot": [100.0] },
//!   "intensity": { "lambda": 0.1 },
//!   "measure": { "psi": 0.0 },
//!   "claim": { "V": { "call": 100 }, "C": [[0.0, 0.4]] },
//!   "grid": { "steps": 50 },
//!   "paths": 100000,
//!   "seed": 42,
//!   "solver": { "basis": { "spline": 30 } }
//! }
//! ```
//!
//! Every time-dependent coefficient is either a constant or a list of
//! `[time, value]` breakpoints starting at 0.

use std::path::{Path, PathBuf};

use dbsde_core::bsde::{Driver, PicardConfig, SolverConfig};
use dbsde_core::claims::{Payoff, PayoffSpec};
use dbsde_core::default_model::IntensityModel;
use dbsde_core::hedging::{defaultable_driver, MeasureChange};
use dbsde_core::linalg::Matrix;
use dbsde_core::market::MarketParams;
use dbsde_core::regression::Basis;
use dbsde_core::{PiecewiseConstant, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::RunError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub market: MarketConfig,
    pub intensity: IntensityConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    pub claim: ClaimConfig,
    pub grid: GridConfig,
    pub paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub oracle: OracleTolerance,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// A constant or `[[t, value], ...]` breakpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule<T> {
    Constant(T),
    Steps(Vec<(f64, T)>),
}

impl<T: Clone> Schedule<T> {
    fn build(&self) -> dbsde_core::Result<PiecewiseConstant<T>> {
        match self {
            Schedule::Constant(v) => Ok(PiecewiseConstant::constant(v.clone())),
            Schedule::Steps(points) => PiecewiseConstant::new(points.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub horizon: f64,
    pub rate: Schedule<f64>,
    pub drift: Schedule<Vec<f64>>,
    /// Volatility matrices, given by rows.
    pub volatility: Schedule<Vec<Vec<f64>>>,
    pub spot: Vec<f64>,
    #[serde(default = "one")]
    pub riskless_init: f64,
    /// Eigenvalue bounds `eps ≤ σσ* ≤ cap` for the admissibility check.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_cap")]
    pub cap: f64,
}

fn one() -> f64 {
    1.0
}

fn default_eps() -> f64 {
    1e-4
}

fn default_cap() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityConfig {
    pub lambda: Schedule<f64>,
    /// `K₁`; defaults to the largest intensity value.
    #[serde(default)]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default)]
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffConfig {
    Constant(f64),
    Call(f64),
    Put(f64),
    Digital(f64),
}

impl From<PayoffConfig> for Payoff {
    fn from(p: PayoffConfig) -> Self {
        match p {
            PayoffConfig::Constant(c) => Payoff::Constant(c),
            PayoffConfig::Call(k) => Payoff::Call(k),
            PayoffConfig::Put(k) => Payoff::Put(k),
            PayoffConfig::Digital(k) => Payoff::Digital(k),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimConfig {
    #[serde(rename = "V")]
    pub v: PayoffConfig,
    #[serde(rename = "C", default = "zero_schedule")]
    pub c: Schedule<f64>,
    #[serde(default)]
    pub underlying: usize,
}

fn zero_schedule() -> Schedule<f64> {
    Schedule::Constant(0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridConfig {
    Uniform { steps: usize },
    Nodes { nodes: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisConfig {
    Polynomial(usize),
    Spline(usize),
}

impl From<BasisConfig> for Basis {
    fn from(b: BasisConfig) -> Self {
        match b {
            BasisConfig::Polynomial(d) => Basis::Polynomial(d),
            BasisConfig::Spline(k) => Basis::LinearSpline(k),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_basis")]
    pub basis: BasisConfig,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default)]
    pub picard: PicardSection,
}

fn default_basis() -> BasisConfig {
    BasisConfig::Polynomial(4)
}

fn default_ridge() -> f64 {
    1e-8
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            basis: default_basis(),
            ridge: default_ridge(),
            picard: PicardSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
}

fn yes() -> bool {
    true
}

fn default_max_iters() -> usize {
    20
}

fn default_tolerance() -> f64 {
    1e-4
}

impl Default for PicardSection {
    fn default() -> Self {
        Self {
            enabled: true,
            max_iters: default_max_iters(),
            tolerance: default_tolerance(),
            gamma: None,
        }
    }
}

/// How close `Y₀` must be to the closed form for `oracle.match`. When
/// neither is given: 5e-3 absolute for constant `V`, 1% relative otherwise.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTolerance {
    #[serde(default)]
    pub abs: Option<f64>,
    #[serde(default)]
    pub rel: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Number of leading paths dumped to `paths.csv` (0 for none).
    #[serde(default)]
    pub path_rows: usize,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            formats: default_formats(),
            path_rows: 0,
        }
    }
}

/// A validated configuration with the core objects built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub params: MarketParams,
    pub model: IntensityModel,
    pub measure: MeasureChange,
    pub claim: PayoffSpec,
    pub grid: TimeGrid,
    pub paths: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub picard: bool,
    pub tolerance: OracleTolerance,
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::validation(format!("cannot parse {}: {e}", path.display())))
    }

    /// Builds every core object, collecting all violated invariants rather
    /// than stopping at the first.
    pub fn build(&self) -> Result<Experiment, RunError> {
        let mut errors = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errors.push(format!(
                "schema_version must be {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }

        let params = self.market_params();
        let model = self.intensity_model();
        let measure = MeasureChange::new(self.measure.psi).map_err(|e| format!("measure: {e}"));
        let claim = self.claim_spec();
        let grid = self.time_grid();
        let basis: Basis = self.solver.basis.into();

        let (params, model, measure, claim, grid) = match (params, model, measure, claim, grid) {
            (Ok(p), Ok(m), Ok(mc), Ok(c), Ok(g)) => (p, m, mc, c, g),
            (p, m, mc, c, g) => {
                for e in [p.err(), m.err(), mc.err(), c.err(), g.err()]
                    .into_iter()
                    .flatten()
                {
                    errors.push(e);
                }
                if self.paths == 0 {
                    errors.push("paths must be positive".into());
                }
                return Err(RunError::Validation(errors));
            }
        };

        for v in params.validate(self.market.eps, self.market.cap) {
            errors.push(format!("market: {v}"));
        }
        if (grid.horizon() - params.horizon()).abs() > 1e-12 * params.horizon() {
            errors.push(format!(
                "TimeGrid: last node {} must equal the market horizon {}",
                grid.horizon(),
                params.horizon()
            ));
        }
        if let Err(e) = grid.check_breakpoints(&params.breakpoints()) {
            errors.push(format!("market: {e}"));
        }
        if let Err(e) = grid.check_breakpoints(model.schedule().breakpoints()) {
            errors.push(format!("intensity: {e}"));
        }
        if claim.underlying() >= params.dim() {
            errors.push(format!(
                "claim: underlying {} but the market has {} assets",
                claim.underlying(),
                params.dim()
            ));
        }
        let size = basis.size(params.dim());
        if self.paths < 10 * size {
            errors.push(format!(
                "paths: {} paths for {size} basis functions, need at least {}",
                self.paths,
                10 * size
            ));
        }
        if !(self.solver.ridge >= 0.0) {
            errors.push("solver.ridge must be >= 0".into());
        }
        if !(self.solver.picard.tolerance > 0.0) {
            errors.push("solver.picard.tolerance must be positive".into());
        }
        if self.solver.picard.max_iters == 0 {
            errors.push("solver.picard.max_iters must be positive".into());
        }
        match defaultable_driver(&params, &model, &measure) {
            Ok(driver) => {
                let k = driver.constant();
                if grid.max_dt() * k >= 1.0 {
                    errors.push(format!(
                        "grid: dt*K = {} must be below 1",
                        grid.max_dt() * k
                    ));
                }
            }
            Err(e) => errors.push(format!("market: {e}")),
        }
        if !errors.is_empty() {
            return Err(RunError::Validation(errors));
        }
        Ok(Experiment {
            name: self.name.clone().unwrap_or_else(|| "experiment".into()),
            params,
            model,
            measure,
            claim,
            grid,
            paths: self.paths,
            seed: self.seed,
            solver: SolverConfig {
                basis,
                ridge: self.solver.ridge,
                picard: PicardConfig {
                    max_iters: self.solver.picard.max_iters,
                    tolerance: self.solver.picard.tolerance,
                    gamma: self.solver.picard.gamma,
                },
            },
            picard: self.solver.picard.enabled,
            tolerance: self.oracle,
            outputs: self.outputs.clone(),
        })
    }

    fn market_params(&self) -> Result<MarketParams, String> {
        let m = &self.market;
        let rate = m.rate.build().map_err(|e| format!("market.rate: {e}"))?;
        let drift = m.drift.build().map_err(|e| format!("market.drift: {e}"))?;
        let rows = m
            .volatility
            .build()
            .map_err(|e| format!("market.volatility: {e}"))?;
        let mut points = Vec::new();
        for (t, r) in rows.breakpoints().iter().zip(rows.values()) {
            let matrix = Matrix::from_rows(r.clone()).ok_or_else(|| {
                format!("market.volatility at t={t}: rows must form a square matrix")
            })?;
            points.push((*t, matrix));
        }
        let vol = PiecewiseConstant::new(points).map_err(|e| format!("market.volatility: {e}"))?;
        MarketParams::new(m.horizon, rate, drift, vol, m.riskless_init, m.spot.clone())
            .map_err(|e| format!("market: {e}"))
    }

    fn claim_spec(&self) -> Result<PayoffSpec, String> {
        let compensation = self.claim.c.build().map_err(|e| format!("claim.C: {e}"))?;
        PayoffSpec::new(self.claim.v.into(), compensation)
            .map(|c| c.on_asset(self.claim.underlying))
            .map_err(|e| format!("claim: {e}"))
    }

    fn intensity_model(&self) -> Result<IntensityModel, String> {
        let lambda = self
            .intensity
            .lambda
            .build()
            .map_err(|e| format!("intensity.lambda: {e}"))?;
        let bound = self
            .intensity
            .bound
            .unwrap_or_else(|| lambda.values().iter().copied().fold(0.0, f64::max));
        IntensityModel::new(lambda, bound).map_err(|e| format!("intensity: {e}"))
    }

    fn time_grid(&self) -> Result<TimeGrid, String> {
        let grid = match &self.grid {
            GridConfig::Uniform { steps } => TimeGrid::uniform(self.market.horizon, *steps),
            GridConfig::Nodes { nodes } => TimeGrid::new(nodes.clone()),
        };
        grid.map_err(|e| format!("TimeGrid: {e}"))
    }
}

//! Defaultable-market BSDE: driver, defaultable zero-coupon, strategy
//! extraction and forward replication.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bsde::Estimate;
use crate::bsde::{BsdeSolution, Driver};
use crate::claims::PayoffSpec;
use crate::default_model::IntensityModel;
use crate::grid::TimeGrid;
use crate::linalg::{dot, Matrix};
use crate::market::MarketParams;
use crate::math::{exp, sq, sqrt};
use crate::piecewise::PiecewiseConstant;
use crate::scenario::ScenarioSet;
use crate::{Error, Result};

/// Market price of default risk `ψ > −1`, constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureChange {
    psi: f64,
}

impl MeasureChange {
    pub fn new(psi: f64) -> Result<Self> {
        if psi.is_nan() || psi <= -1.0 || !psi.is_finite() {
            return Err(Error::InvalidMeasureChange(psi));
        }
        Ok(Self { psi })
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }
}

impl Default for MeasureChange {
    fn default() -> Self {
        Self { psi: 0.0 }
    }
}

/// `f(t, y, z, u) = −r_t y − θ_t·z + (1 − H_{t⁻}) ψ λ_t u`.
#[derive(Debug, Clone)]
pub struct HedgingDriver {
    rate: PiecewiseConstant<f64>,
    premium: PiecewiseConstant<Vec<f64>>,
    intensity: PiecewiseConstant<f64>,
    psi: f64,
    lipschitz: f64,
    intensity_bound: f64,
}

impl HedgingDriver {
    pub fn psi(&self) -> f64 {
        self.psi
    }
}

impl Driver for HedgingDriver {
    fn eval(&self, t: f64, y: f64, z: &[f64], u: f64, pre_default: bool) -> f64 {
        let mut f = -self.rate.at(t) * y - dot(self.premium.at(t), z);
        if pre_default {
            f += self.psi * self.intensity.at(t) * u;
        }
        f
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn intensity_bound(&self) -> f64 {
        self.intensity_bound
    }
}

/// Builds the hedging driver with `K₂ = max(sup r, sup ‖θ‖, |ψ| K₁)`.
pub fn defaultable_driver(
    params: &MarketParams,
    model: &IntensityModel,
    mc: &MeasureChange,
) -> Result<HedgingDriver> {
    let premium = params.risk_premium_schedule()?;
    let horizon = params.horizon();
    let sup_theta = premium
        .pieces(0.0, horizon)
        .map(|(_, _, th)| sqrt(th.iter().map(|v| v * v).sum::<f64>()))
        .fold(0.0, f64::max);
    let sup_rate = params.rate().sup_abs(horizon);
    let lipschitz = sup_rate.max(sup_theta).max(mc.psi().abs() * model.bound());
    Ok(HedgingDriver {
        rate: params.rate().clone(),
        premium,
        intensity: model.schedule().clone(),
        psi: mc.psi(),
        lipschitz,
        intensity_bound: model.bound(),
    })
}

/// Defaultable zero-coupon `ρ` on a grid: `dρ = ρ_{t⁻}(a dt + c·dW − dM)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCouponModel {
    grid: TimeGrid,
    /// `exp(−∫_t^T (r + (1+ψ)λ))` at each node.
    rho_pre: Vec<f64>,
    /// Brownian loading per node and asset; zero for deterministic coefficients.
    c: Vec<Vec<f64>>,
    /// `a` before and after default at each node.
    a_pre: Vec<f64>,
    a_post: Vec<f64>,
    rate: Vec<f64>,
    theta: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    psi: f64,
    /// `(r + (1+ψ)λ)` as a step function, for prices between nodes.
    yield_schedule: PiecewiseConstant<f64>,
}

/// Prices the defaultable zero-coupon and its loadings on the grid nodes.
pub fn zc_price_and_loadings(
    params: &MarketParams,
    model: &IntensityModel,
    mc: &MeasureChange,
    grid: &TimeGrid,
) -> Result<ZeroCouponModel> {
    params.check_grid(grid)?;
    grid.check_breakpoints(model.schedule().breakpoints())?;
    let m = params.dim();
    let psi = mc.psi();
    let mut points = Vec::new();
    for t in crate::piecewise::merge_breakpoints(
        [params.rate().breakpoints(), model.schedule().breakpoints()],
        grid.horizon(),
    ) {
        points.push((t, params.rate().at(t) + (1.0 + psi) * model.intensity(t)));
    }
    let yield_schedule = PiecewiseConstant::new(points)?;
    let horizon = grid.horizon();
    let nodes = grid.steps() + 1;
    let mut out = ZeroCouponModel {
        grid: grid.clone(),
        rho_pre: Vec::with_capacity(nodes),
        c: Vec::with_capacity(nodes),
        a_pre: Vec::with_capacity(nodes),
        a_post: Vec::with_capacity(nodes),
        rate: Vec::with_capacity(nodes),
        theta: Vec::with_capacity(nodes),
        lambda: Vec::with_capacity(nodes),
        psi,
        yield_schedule,
    };
    for k in 0..nodes {
        let t = grid.time(k);
        let r = *params.rate().at(t);
        let theta = params.risk_premium(t)?;
        let lambda = model.intensity(t);
        let c = vec![0.0; m];
        let a_post = r + dot(&theta, &c);
        out.rho_pre
            .push(exp(-out.yield_schedule.integral(t, horizon)));
        out.a_pre.push(a_post + psi * lambda);
        out.a_post.push(a_post);
        out.c.push(c);
        out.rate.push(r);
        out.theta.push(theta);
        out.lambda.push(lambda);
    }
    Ok(out)
}

impl ZeroCouponModel {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Pre-default price at node `k`.
    pub fn rho_pre(&self, k: usize) -> f64 {
        self.rho_pre[k]
    }

    /// Pre-default price at an arbitrary time.
    pub fn rho_pre_at(&self, t: f64) -> f64 {
        exp(-self.yield_schedule.integral(t, self.grid.horizon()))
    }

    /// `ρ` on a path at node `k`: zero once default has occurred.
    pub fn rho(&self, scenarios: &ScenarioSet, path: usize, k: usize) -> f64 {
        if scenarios.alive(path, k) {
            self.rho_pre[k]
        } else {
            0.0
        }
    }

    pub fn c(&self, k: usize) -> &[f64] {
        &self.c[k]
    }

    /// `a_t` at node `k`, given `H_{t⁻}`.
    pub fn a(&self, k: usize, pre_default: bool) -> f64 {
        if pre_default {
            self.a_pre[k]
        } else {
            self.a_post[k]
        }
    }

    /// Largest deviation from `a = r + θ·c + (1 − H_{t⁻}) ψ λ` over all nodes
    /// and both default states.
    pub fn no_arbitrage_gap(&self) -> f64 {
        let mut gap: f64 = 0.0;
        for k in 0..self.rho_pre.len() {
            let base = self.rate[k] + dot(&self.theta[k], &self.c[k]);
            gap = gap.max((self.a_pre[k] - (base + self.psi * self.lambda[k])).abs());
            gap = gap.max((self.a_post[k] - base).abs());
        }
        gap
    }

    /// Largest deviation, over steps, between the pre-default log-growth of
    /// `ρ` and `a + λ` (the drift of `ρ` once `dM` is compensated).
    pub fn drift_gap(&self) -> f64 {
        (0..self.grid.steps())
            .map(|k| {
                let growth =
                    crate::math::ln(self.rho_pre[k + 1] / self.rho_pre[k]) / self.grid.dt(k);
                (growth - (self.a_pre[k] + self.lambda[k])).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Holdings `(α, β, δ)` in the risky assets, the defaultable zero-coupon and
/// the riskless asset, per path and node. Zero after `T ∧ τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    n_paths: usize,
    nodes: usize,
    dim: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    delta: Vec<f64>,
}

impl Strategy {
    /// Builds a strategy from `[path][node]` arrays (`[path][node][asset]`
    /// for `alpha`).
    pub fn from_parts(
        n_paths: usize,
        nodes: usize,
        dim: usize,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        delta: Vec<f64>,
    ) -> Result<Self> {
        if alpha.len() != n_paths * nodes * dim
            || beta.len() != n_paths * nodes
            || delta.len() != n_paths * nodes
        {
            return Err(Error::Mismatch(
                "strategy arrays have inconsistent lengths".into(),
            ));
        }
        Ok(Self {
            n_paths,
            nodes,
            dim,
            alpha,
            beta,
            delta,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn alpha(&self, path: usize, node: usize) -> &[f64] {
        let idx = path * self.nodes + node;
        &self.alpha[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn beta(&self, path: usize, node: usize) -> f64 {
        self.beta[path * self.nodes + node]
    }

    pub fn delta(&self, path: usize, node: usize) -> f64 {
        self.delta[path * self.nodes + node]
    }

    /// Largest `|Y − α·S − β ρ_{t⁻} − δ S⁰|` over pre-default nodes.
    pub fn decomposition_residual(
        &self,
        solution: &BsdeSolution,
        scenarios: &ScenarioSet,
        zc: &ZeroCouponModel,
        params: &MarketParams,
    ) -> f64 {
        let grid = scenarios.grid();
        let s0: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|t| params.riskless_price(*t))
            .collect();
        let mut worst: f64 = 0.0;
        for path in 0..self.n_paths {
            for k in 0..grid.steps() {
                if !scenarios.alive(path, k) {
                    break;
                }
                let held = dot(self.alpha(path, k), scenarios.spot(path, k))
                    + self.beta(path, k) * zc.rho_pre(k)
                    + self.delta(path, k) * s0[k];
                worst = worst.max((solution.y(path, k) - held).abs());
            }
        }
        worst
    }
}

fn check_shapes(
    solution: &BsdeSolution,
    scenarios: &ScenarioSet,
    zc: &ZeroCouponModel,
) -> Result<()> {
    if zc.grid() != scenarios.grid() {
        return Err(Error::Mismatch(
            "zero-coupon model and scenarios use different grids".into(),
        ));
    }
    if solution.n_paths() != scenarios.n_paths()
        || solution.nodes() != scenarios.grid().steps() + 1
        || solution.dim() != scenarios.dim()
    {
        return Err(Error::Mismatch(
            "solution shape does not match the scenarios".into(),
        ));
    }
    Ok(())
}

/// Reads the hedge off `Z = α σ S + β c ρ_{t⁻}` and `U = −β ρ_{t⁻}`, with
/// `δ` closing the wealth decomposition.
pub fn extract_strategy(
    solution: &BsdeSolution,
    scenarios: &ScenarioSet,
    zc: &ZeroCouponModel,
    params: &MarketParams,
) -> Result<Strategy> {
    check_shapes(solution, scenarios, zc)?;
    let grid = scenarios.grid();
    let n = scenarios.n_paths();
    let m = scenarios.dim();
    let nodes = grid.steps() + 1;
    // Rows of σ_t^{-T}, one matrix per step.
    let mut inv_t = Vec::with_capacity(grid.steps());
    for k in 0..grid.steps() {
        let sigma_t = params.volatility().at(grid.time(k)).transpose();
        let mut cols = Vec::with_capacity(m);
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let col = sigma_t.solve(&e).ok_or_else(|| {
                Error::InvalidMarket(format!("sigma is singular at t={}", grid.time(k)))
            })?;
            cols.push(col);
        }
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| cols[j][i]).collect())
            .collect();
        inv_t.push(Matrix::from_rows(rows).expect("square"));
    }

    let mut alpha = vec![0.0; n * nodes * m];
    let mut beta = vec![0.0; n * nodes];
    let mut delta = vec![0.0; n * nodes];
    let mut rhs = vec![0.0; m];
    for path in 0..n {
        for k in 0..grid.steps() {
            if !scenarios.alive(path, k) {
                break;
            }
            let rho = zc.rho_pre(k);
            if rho.is_nan() || rho <= 0.0 {
                return Err(Error::DegenerateBond { node: k });
            }
            let idx = path * nodes + k;
            let b = -solution.u(path, k) / rho;
            for ((r, z), c) in rhs.iter_mut().zip(solution.z(path, k)).zip(zc.c(k)) {
                *r = z - b * c * rho;
            }
            let x = inv_t[k].mul_vec(&rhs);
            let spot = scenarios.spot(path, k);
            for i in 0..m {
                if spot[i] <= 0.0 {
                    return Err(Error::InvalidMarket(format!(
                        "non-positive price on path {path} at node {k}"
                    )));
                }
                alpha[idx * m + i] = x[i] / spot[i];
            }
            let a = &alpha[idx * m..(idx + 1) * m];
            beta[idx] = b;
            delta[idx] = (solution.y(path, k) - dot(a, spot) - b * rho)
                / params.riskless_price(grid.time(k));
        }
    }
    Strategy::from_parts(n, nodes, m, alpha, beta, delta)
}

/// Replication error statistics on one branch of `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchStats {
    pub count: usize,
    pub mean: f64,
    pub rms: f64,
    pub max_abs: f64,
}

impl BranchStats {
    fn from_errors(errors: &[f64]) -> Self {
        if errors.is_empty() {
            return Self::default();
        }
        let n = errors.len() as f64;
        Self {
            count: errors.len(),
            mean: errors.iter().sum::<f64>() / n,
            rms: sqrt(errors.iter().map(|e| sq(*e)).sum::<f64>() / n),
            max_abs: errors.iter().fold(0.0, |a: f64, e| a.max(e.abs())),
        }
    }
}

/// Terminal error `wealth − ξ` at `T ∧ τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationReport {
    pub initial_wealth: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub rms: f64,
    /// Delta-method standard error of `rms`.
    pub rms_se: f64,
    pub max_abs: f64,
    pub survival: BranchStats,
    pub default: BranchStats,
}

/// Runs the self-financing wealth forward from `α_0·S_0 + β_0 ρ_0 + δ_0 S⁰_0`.
///
/// Between nodes the portfolio is held fixed; at each node the risky and
/// bond positions are reset to the strategy and the riskless account absorbs
/// the difference. On a step containing `τ` the position is marked at `τ`,
/// with `S_τ`, `S⁰_τ` and the bond worth zero, and compared with `C(τ)`.
pub fn replicate_forward(
    strategy: &Strategy,
    scenarios: &ScenarioSet,
    zc: &ZeroCouponModel,
    params: &MarketParams,
    claim: &PayoffSpec,
) -> Result<ReplicationReport> {
    if zc.grid() != scenarios.grid() {
        return Err(Error::Mismatch(
            "zero-coupon model and scenarios use different grids".into(),
        ));
    }
    let grid = scenarios.grid();
    if strategy.n_paths() != scenarios.n_paths()
        || strategy.nodes() != grid.steps() + 1
        || strategy.dim != scenarios.dim()
    {
        return Err(Error::Mismatch(
            "strategy shape does not match the scenarios".into(),
        ));
    }
    let steps = grid.steps();
    let s0: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|t| params.riskless_price(*t))
        .collect();
    let mut errors = Vec::with_capacity(scenarios.n_paths());
    let mut survival = Vec::new();
    let mut default = Vec::new();
    let mut initial = 0.0;
    for path in 0..scenarios.n_paths() {
        let mut alpha = strategy.alpha(path, 0);
        let mut beta = strategy.beta(path, 0);
        let mut delta = strategy.delta(path, 0);
        let w0 = dot(alpha, scenarios.spot(path, 0)) + beta * zc.rho_pre(0) + delta * s0[0];
        initial += w0;
        let tau = scenarios.tau(path);
        let mut err = None;
        for k in 0..steps {
            if tau <= grid.time(k + 1) {
                let spot = scenarios
                    .default_spot(path)
                    .expect("default inside the horizon");
                let wealth = dot(alpha, spot) + delta * params.riskless_price(tau);
                let e = wealth - claim.compensation(tau);
                default.push(e);
                err = Some(e);
                break;
            }
            let spot = scenarios.spot(path, k + 1);
            let wealth = dot(alpha, spot) + beta * zc.rho_pre(k + 1) + delta * s0[k + 1];
            if k + 1 == steps {
                let e = wealth - claim.survival_value(spot);
                survival.push(e);
                err = Some(e);
                break;
            }
            alpha = strategy.alpha(path, k + 1);
            beta = strategy.beta(path, k + 1);
            delta = (wealth - dot(alpha, spot) - beta * zc.rho_pre(k + 1)) / s0[k + 1];
        }
        errors.push(err.expect("every path reaches T or τ"));
    }
    let n = errors.len() as f64;
    let all = BranchStats::from_errors(&errors);
    let squares: Vec<f64> = errors.iter().map(|e| sq(*e)).collect();
    let rms_se = if all.rms > 0.0 {
        Estimate::from_samples(&squares).std_error / (2.0 * all.rms)
    } else {
        0.0
    };
    Ok(ReplicationReport {
        initial_wealth: initial / n,
        mean: all.mean,
        mean_se: Estimate::from_samples(&errors).std_error,
        rms: all.rms,
        rms_se,
        max_abs: all.max_abs,
        survival: BranchStats::from_errors(&survival),
        default: BranchStats::from_errors(&default),
    })
}

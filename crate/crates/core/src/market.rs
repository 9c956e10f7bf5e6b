//! Default-free market: riskless asset `dS⁰ = r S⁰ dt` and `m` risky assets
//! `dSⁱ = μⁱ Sⁱ dt + Sⁱ (σⁱ, dW)`, all coefficients deterministic and
//! piecewise constant.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::grid::TimeGrid;
use crate::linalg::Matrix;
use crate::math::{exp, ln, sqrt};
use crate::piecewise::{merge_breakpoints, PiecewiseConstant};
use crate::rng::{path_rng, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    horizon: f64,
    dim: usize,
    rate: PiecewiseConstant<f64>,
    drift: PiecewiseConstant<Vec<f64>>,
    volatility: PiecewiseConstant<Matrix>,
    riskless_init: f64,
    risky_init: Vec<f64>,
}

/// Admissibility condition a market can break.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Bounded, deterministic, non-negative rate and bounded drift.
    M1,
    /// `ε I ≤ σσ* ≤ K I`.
    M2,
    /// `σ` invertible with bounded inverse.
    M3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    /// Breakpoint at which the violation occurs.
    pub time: f64,
    pub detail: String,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "({:?}) at t={}: {}",
            self.condition, self.time, self.detail
        )
    }
}

impl MarketParams {
    pub fn new(
        horizon: f64,
        rate: PiecewiseConstant<f64>,
        drift: PiecewiseConstant<Vec<f64>>,
        volatility: PiecewiseConstant<Matrix>,
        riskless_init: f64,
        risky_init: Vec<f64>,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidMarket(format!(
                "horizon {horizon} must be positive"
            )));
        }
        let dim = risky_init.len();
        if dim == 0 {
            return Err(Error::InvalidMarket("need at least one risky asset".into()));
        }
        if drift.values().iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidMarket(format!(
                "drift vectors must have dimension {dim}"
            )));
        }
        if volatility.values().iter().any(|s| s.dim() != dim) {
            return Err(Error::InvalidMarket(format!(
                "volatility matrices must be {dim}x{dim}"
            )));
        }
        if !(riskless_init > 0.0) || risky_init.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidMarket(
                "initial prices must be positive".into(),
            ));
        }
        Ok(Self {
            horizon,
            dim,
            rate,
            drift,
            volatility,
            riskless_init,
            risky_init,
        })
    }

    /// One-asset market with constant coefficients and `S⁰_0 = 1`.
    pub fn constant_1d(horizon: f64, rate: f64, drift: f64, vol: f64, spot: f64) -> Result<Self> {
        Self::new(
            horizon,
            PiecewiseConstant::constant(rate),
            PiecewiseConstant::constant(vec![drift]),
            PiecewiseConstant::constant(Matrix::scalar(vol)),
            1.0,
            vec![spot],
        )
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rate(&self) -> &PiecewiseConstant<f64> {
        &self.rate
    }

    pub fn drift(&self) -> &PiecewiseConstant<Vec<f64>> {
        &self.drift
    }

    pub fn volatility(&self) -> &PiecewiseConstant<Matrix> {
        &self.volatility
    }

    pub fn riskless_init(&self) -> f64 {
        self.riskless_init
    }

    pub fn risky_init(&self) -> &[f64] {
        &self.risky_init
    }

    /// Union of all coefficient breakpoints inside `[0, T)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        merge_breakpoints(
            [
                self.rate.breakpoints(),
                self.drift.breakpoints(),
                self.volatility.breakpoints(),
            ],
            self.horizon,
        )
    }

    /// Every (M1)–(M3) violation, tagged with its breakpoint. An empty list
    /// means the market is admissible for bounds `0 < eps < cap`.
    pub fn validate(&self, eps: f64, cap: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(eps > 0.0 && eps < cap) {
            out.push(Violation {
                condition: Condition::M2,
                time: 0.0,
                detail: format!("bounds must satisfy 0 < eps < cap, got eps={eps}, cap={cap}"),
            });
        }
        for (lo, _, r) in self.rate.pieces(0.0, self.horizon) {
            if !r.is_finite() || *r < 0.0 {
                out.push(Violation {
                    condition: Condition::M1,
                    time: lo,
                    detail: format!("rate {r} must be finite and >= 0"),
                });
            }
        }
        for (lo, _, mu) in self.drift.pieces(0.0, self.horizon) {
            if mu.iter().any(|x| !x.is_finite()) {
                out.push(Violation {
                    condition: Condition::M1,
                    time: lo,
                    detail: "drift must be finite".into(),
                });
            }
        }
        for (lo, _, sigma) in self.volatility.pieces(0.0, self.horizon) {
            if !sigma.is_finite() {
                out.push(Violation {
                    condition: Condition::M2,
                    time: lo,
                    detail: "volatility must be finite".into(),
                });
                continue;
            }
            let eig = sigma.gram().symmetric_eigenvalues();
            let (min, max) = (eig[0], eig[eig.len() - 1]);
            if min < eps || max > cap {
                out.push(Violation {
                    condition: Condition::M2,
                    time: lo,
                    detail: format!(
                        "eigenvalues of sigma sigma* in [{min}, {max}], outside [{eps}, {cap}]"
                    ),
                });
            }
            if sigma.solve(&vec![0.0; self.dim]).is_none() || min <= 0.0 {
                out.push(Violation {
                    condition: Condition::M3,
                    time: lo,
                    detail: "sigma is singular".into(),
                });
            }
        }
        out
    }

    /// Risk premium `θ_t = σ_t⁻¹(μ_t − r_t 1)`.
    pub fn risk_premium(&self, t: f64) -> Result<Vec<f64>> {
        let r = *self.rate.at(t);
        let excess: Vec<f64> = self.drift.at(t).iter().map(|mu| mu - r).collect();
        self.volatility
            .at(t)
            .solve(&excess)
            .ok_or_else(|| Error::InvalidMarket(format!("sigma is singular at t={t}")))
    }

    /// Risk premium as a step function on the union of breakpoints.
    pub fn risk_premium_schedule(&self) -> Result<PiecewiseConstant<Vec<f64>>> {
        let mut points = Vec::new();
        for t in self.breakpoints() {
            points.push((t, self.risk_premium(t)?));
        }
        PiecewiseConstant::new(points)
    }

    /// `R_t = exp(−∫₀ᵗ r_s ds)`.
    pub fn discount_factor(&self, t: f64) -> f64 {
        exp(-self.rate.integral(0.0, t))
    }

    /// Riskless asset `S⁰_t = S⁰_0 / R_t`.
    pub fn riskless_price(&self, t: f64) -> f64 {
        self.riskless_init / self.discount_factor(t)
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if (grid.horizon() - self.horizon).abs() > crate::grid::NODE_TOLERANCE {
            return Err(Error::Mismatch(format!(
                "grid ends at {} but the market horizon is {}",
                grid.horizon(),
                self.horizon
            )));
        }
        grid.check_breakpoints(&self.breakpoints())
    }

    /// Log-drift `μ − ½ diag(σσ*)` and `σ` frozen on each step.
    pub(crate) fn step_coefficients(&self, grid: &TimeGrid) -> Vec<(Vec<f64>, Matrix)> {
        (0..grid.steps())
            .map(|k| {
                let t = grid.time(k);
                let sigma = self.volatility.at(t).clone();
                let mu = self.drift.at(t);
                let log_drift = (0..self.dim)
                    .map(|i| mu[i] - 0.5 * sigma.row(i).iter().map(|s| s * s).sum::<f64>())
                    .collect();
                (log_drift, sigma)
            })
            .collect()
    }

    /// Exact log-normal stepping of the risky assets. Path `i` uses its own
    /// random stream, so it does not depend on `n_paths`.
    pub fn simulate_assets(
        &self,
        grid: &TimeGrid,
        n_paths: usize,
        seed: u64,
    ) -> Result<AssetPaths> {
        self.check_grid(grid)?;
        let m = self.dim;
        let steps = grid.steps();
        let nodes = steps + 1;
        let coeffs = self.step_coefficients(grid);
        let sqrt_dt: Vec<f64> = (0..steps).map(|k| sqrt(grid.dt(k))).collect();
        let log_init: Vec<f64> = self.risky_init.iter().map(|s| ln(*s)).collect();

        let mut prices = vec![0.0; n_paths * nodes * m];
        let mut increments = vec![0.0; n_paths * steps * m];
        let mut log_s = vec![0.0; m];
        let mut dw = vec![0.0; m];
        for path in 0..n_paths {
            let mut rng = path_rng(seed, Stream::Brownian, path);
            log_s.copy_from_slice(&log_init);
            prices[path * nodes * m..path * nodes * m + m].copy_from_slice(&self.risky_init);
            for k in 0..steps {
                for w in dw.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *w = sqrt_dt[k] * z;
                }
                let (log_drift, sigma) = &coeffs[k];
                let dt = grid.dt(k);
                for i in 0..m {
                    log_s[i] += log_drift[i] * dt + crate::linalg::dot(sigma.row(i), &dw);
                }
                let base = (path * nodes + k + 1) * m;
                for i in 0..m {
                    prices[base + i] = exp(log_s[i]);
                }
                increments[(path * steps + k) * m..(path * steps + k + 1) * m].copy_from_slice(&dw);
            }
        }
        Ok(AssetPaths {
            n_paths,
            nodes,
            dim: m,
            prices,
            increments,
        })
    }
}

/// Simulated risky-asset prices and the Brownian increments that drove them.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetPaths {
    n_paths: usize,
    nodes: usize,
    dim: usize,
    prices: Vec<f64>,
    increments: Vec<f64>,
}

impl AssetPaths {
    /// Builds paths from raw arrays laid out `[path][node][asset]` and
    /// `[path][step][asset]`.
    pub fn from_raw(
        n_paths: usize,
        nodes: usize,
        dim: usize,
        prices: Vec<f64>,
        increments: Vec<f64>,
    ) -> Result<Self> {
        if nodes < 2
            || prices.len() != n_paths * nodes * dim
            || increments.len() != n_paths * (nodes - 1) * dim
        {
            return Err(Error::Mismatch(
                "asset path arrays have inconsistent lengths".into(),
            ));
        }
        Ok(Self {
            n_paths,
            nodes,
            dim,
            prices,
            increments,
        })
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

    /// `S_{t_k}` on one path.
    #[inline]
    pub fn spot(&self, path: usize, node: usize) -> &[f64] {
        let base = (path * self.nodes + node) * self.dim;
        &self.prices[base..base + self.dim]
    }

    /// `ΔW_k = W_{t_{k+1}} − W_{t_k}` on one path.
    #[inline]
    pub fn increment(&self, path: usize, step: usize) -> &[f64] {
        let base = (path * (self.nodes - 1) + step) * self.dim;
        &self.increments[base..base + self.dim]
    }

    /// Keeps the first `n_paths` paths and the nodes listed in `node_map`,
    /// summing Brownian increments between kept nodes.
    pub(crate) fn restrict(&self, node_map: &[usize], n_paths: usize) -> Self {
        let m = self.dim;
        let nodes = node_map.len();
        let mut prices = Vec::with_capacity(n_paths * nodes * m);
        let mut increments = Vec::with_capacity(n_paths * (nodes - 1) * m);
        for path in 0..n_paths {
            for &k in node_map {
                prices.extend_from_slice(self.spot(path, k));
            }
            for w in node_map.windows(2) {
                let mut sum = vec![0.0; m];
                for step in w[0]..w[1] {
                    for (s, d) in sum.iter_mut().zip(self.increment(path, step)) {
                        *s += d;
                    }
                }
                increments.extend_from_slice(&sum);
            }
        }
        Self {
            n_paths,
            nodes,
            dim: m,
            prices,
            increments,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(mu: f64, r: f64, sigma: f64) -> MarketParams {
        MarketParams::constant_1d(1.0, r, mu, sigma, 1.0).unwrap()
    }

    #[test]
    fn admissible_one_dimensional() {
        assert!(one_d(0.05, 0.02, 0.2).validate(0.01, 1.0).is_empty());
    }

    #[test]
    fn zero_volatility_breaks_m2_and_m3() {
        let v = one_d(0.05, 0.02, 0.0).validate(0.01, 1.0);
        assert!(v
            .iter()
            .any(|x| x.condition == Condition::M2 && x.time == 0.0));
        assert!(v
            .iter()
            .any(|x| x.condition == Condition::M3 && x.time == 0.0));
    }

    #[test]
    fn admissible_diagonal_two_assets() {
        let p = MarketParams::new(
            1.0,
            PiecewiseConstant::constant(0.01),
            PiecewiseConstant::constant(vec![0.05, 0.03]),
            PiecewiseConstant::constant(Matrix::diagonal(&[0.3, 0.3])),
            1.0,
            vec![1.0, 1.0],
        )
        .unwrap();
        assert!(p.validate(0.01, 1.0).is_empty());
    }

    #[test]
    fn negative_rate_is_m1_at_its_breakpoint() {
        let p = MarketParams::new(
            1.0,
            PiecewiseConstant::new(vec![(0.0, 0.01), (0.5, -0.01)]).unwrap(),
            PiecewiseConstant::constant(vec![0.05]),
            PiecewiseConstant::constant(Matrix::scalar(0.2)),
            1.0,
            vec![1.0],
        )
        .unwrap();
        let v = p.validate(0.01, 1.0);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].condition, v[0].time), (Condition::M1, 0.5));
    }

    #[test]
    fn risk_premium_examples() {
        let th = one_d(0.06, 0.02, 0.2).risk_premium(0.3).unwrap();
        assert!((th[0] - 0.2).abs() < 1e-15);
        assert_eq!(
            one_d(0.02, 0.02, 0.35).risk_premium(0.0).unwrap(),
            vec![0.0]
        );
        let p = MarketParams::new(
            1.0,
            PiecewiseConstant::constant(0.01),
            PiecewiseConstant::constant(vec![0.05, 0.03]),
            PiecewiseConstant::constant(Matrix::diagonal(&[0.25, 0.25])),
            1.0,
            vec![1.0, 1.0],
        )
        .unwrap();
        let th = p.risk_premium(0.5).unwrap();
        assert!((th[0] - 0.16).abs() < 1e-15 && (th[1] - 0.08).abs() < 1e-15);
        assert!(matches!(
            one_d(0.06, 0.02, 0.0).risk_premium(0.0),
            Err(Error::InvalidMarket(_))
        ));
    }

    #[test]
    fn discount_factor_examples() {
        assert_eq!(one_d(0.0, 0.0, 0.2).discount_factor(0.7), 1.0);
        assert!((one_d(0.0, 0.05, 0.2).discount_factor(1.0) - 0.951_229_424_500_714).abs() < 1e-12);
        let p = MarketParams::new(
            1.0,
            PiecewiseConstant::new(vec![(0.0, 0.02), (0.5, 0.04)]).unwrap(),
            PiecewiseConstant::constant(vec![0.0]),
            PiecewiseConstant::constant(Matrix::scalar(0.2)),
            1.0,
            vec![1.0],
        )
        .unwrap();
        assert!((p.discount_factor(1.0) - exp(-0.03)).abs() < 1e-15);
    }

    #[test]
    fn off_grid_breakpoint_is_rejected() {
        let p = MarketParams::new(
            1.0,
            PiecewiseConstant::new(vec![(0.0, 0.02), (0.3, 0.04)]).unwrap(),
            PiecewiseConstant::constant(vec![0.0]),
            PiecewiseConstant::constant(Matrix::scalar(0.2)),
            1.0,
            vec![1.0],
        )
        .unwrap();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(
            p.simulate_assets(&grid, 2, 0),
            Err(Error::BreakpointOffGrid(0.3))
        );
    }

    #[test]
    fn paths_do_not_depend_on_path_count() {
        let p = one_d(0.05, 0.0, 0.3);
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let few = p.simulate_assets(&grid, 3, 11).unwrap();
        let many = p.simulate_assets(&grid, 50, 11).unwrap();
        for path in 0..3 {
            for k in 0..=8 {
                assert_eq!(few.spot(path, k), many.spot(path, k));
            }
        }
    }

    #[test]
    fn restriction_sums_increments() {
        let p = one_d(0.05, 0.0, 0.3);
        let fine = p
            .simulate_assets(&TimeGrid::uniform(1.0, 4).unwrap(), 5, 3)
            .unwrap();
        let coarse = fine.restrict(&[0, 2, 4], 2);
        assert_eq!(coarse.n_paths(), 2);
        assert_eq!(coarse.spot(1, 1), fine.spot(1, 2));
        let sum = fine.increment(1, 2)[0] + fine.increment(1, 3)[0];
        assert_eq!(coarse.increment(1, 1)[0], sum);
    }
}

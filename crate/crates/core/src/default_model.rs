//! Intensity-based default time under the immersion hypothesis.
//!
//! With a deterministic intensity `λ`, the conditional law of `τ` given the
//! asset filtration does not depend on the observation date:
//! `F_t = 1 − exp(−Λ_t)`, `Λ_t = ∫₀ᵗ λ`, density `α(θ) = λ(θ) exp(−Λ_θ)`.
//! Default times are drawn as `τ = Λ⁻¹(E)` with `E ~ Exp(1)` taken from a
//! stream that never touches the Brownian noise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Exp1;

use crate::grid::TimeGrid;
use crate::math::exp;
use crate::piecewise::PiecewiseConstant;
use crate::rng::{path_rng, Stream};
use crate::{Error, Result};

/// Default time for paths that survive past the horizon.
pub const NO_DEFAULT: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityModel {
    lambda: PiecewiseConstant<f64>,
    bound: f64,
}

impl IntensityModel {
    /// `bound` is the constant `K₁` with `0 ≤ λ ≤ K₁`.
    pub fn new(lambda: PiecewiseConstant<f64>, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::InvalidIntensity(format!(
                "bound {bound} must be finite and >= 0"
            )));
        }
        for (t, l) in lambda.breakpoints().iter().zip(lambda.values()) {
            if !(*l >= 0.0) || !l.is_finite() {
                return Err(Error::InvalidIntensity(format!(
                    "intensity {l} at t={t} must be finite and >= 0"
                )));
            }
            if *l > bound {
                return Err(Error::InvalidIntensity(format!(
                    "intensity {l} at t={t} exceeds bound {bound}"
                )));
            }
        }
        Ok(Self { lambda, bound })
    }

    /// Constant intensity with `K₁ = λ`.
    pub fn constant(lambda: f64) -> Result<Self> {
        Self::new(PiecewiseConstant::constant(lambda), lambda)
    }

    pub fn schedule(&self) -> &PiecewiseConstant<f64> {
        &self.lambda
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn intensity(&self, t: f64) -> f64 {
        *self.lambda.at(t)
    }

    /// `Λ_t = ∫₀ᵗ λ_s ds`.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        self.lambda.integral(0.0, t)
    }

    /// `1 − F_t = exp(−Λ_t)`.
    pub fn survival(&self, t: f64) -> f64 {
        exp(-self.cumulative_hazard(t))
    }

    /// `F_t = P(τ ≤ t | F_t)`.
    pub fn default_probability(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    /// `P(τ > b | τ > a)`.
    pub fn conditional_survival(&self, a: f64, b: f64) -> f64 {
        exp(-self.lambda.integral(a, b))
    }

    /// Density `α(θ) = λ(θ) exp(−Λ_θ)` of the default time.
    pub fn density(&self, theta: f64) -> f64 {
        self.intensity(theta) * self.survival(theta)
    }

    /// Exact `∫_a^b α(θ) dθ` by piecewise integration.
    pub fn integrated_density(&self, a: f64, b: f64) -> f64 {
        self.lambda
            .pieces(a, b)
            .map(|(lo, hi, _)| self.survival(lo) - self.survival(hi))
            .sum()
    }

    /// Smallest `t ≤ horizon` with `Λ_t = level`, or `None` if `Λ_horizon < level`.
    pub fn inverse_cumulative_hazard(&self, level: f64, horizon: f64) -> Option<f64> {
        let mut acc = 0.0;
        for (lo, hi, l) in self.lambda.pieces(0.0, horizon) {
            let mass = l * (hi - lo);
            if *l > 0.0 && acc + mass >= level {
                return Some((lo + (level - acc) / l).min(hi));
            }
            acc += mass;
        }
        None
    }

    /// Intensity `(1 + ψ) λ` of `τ` under the measure indexed by `ψ > −1`.
    pub fn intensity_under_measure(&self, psi: f64) -> Result<Self> {
        if !(psi > -1.0) || !psi.is_finite() {
            return Err(Error::InvalidMeasureChange(psi));
        }
        let factor = 1.0 + psi;
        Self::new(self.lambda.map(|l| factor * l), factor * self.bound)
    }

    /// Default times on `grid` with indicators and compensated increments.
    pub fn sample_default(
        &self,
        grid: &TimeGrid,
        n_paths: usize,
        seed: u64,
    ) -> Result<DefaultPaths> {
        grid.check_breakpoints(self.lambda.breakpoints())?;
        let horizon = grid.horizon();
        let tau = (0..n_paths)
            .map(|path| {
                let e: f64 = path_rng(seed, Stream::DefaultClock, path).sample(Exp1);
                self.inverse_cumulative_hazard(e, horizon)
                    .unwrap_or(NO_DEFAULT)
            })
            .collect();
        Ok(DefaultPaths::from_times(self, grid, tau))
    }
}

/// Default times of a path set with their node indicators `H_k = 1{τ ≤ t_k}`
/// and compensated increments `ΔM_k = ΔH_k − 1{t_k < τ} λ(t_k) Δt_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultPaths {
    nodes: usize,
    tau: Vec<f64>,
    indicator: Vec<u8>,
    increments: Vec<f64>,
}

impl DefaultPaths {
    /// Fills indicators and compensated increments for given default times.
    pub fn from_times(model: &IntensityModel, grid: &TimeGrid, tau: Vec<f64>) -> Self {
        let nodes = grid.steps() + 1;
        let n = tau.len();
        let mut indicator = vec![0u8; n * nodes];
        let mut increments = vec![0.0; n * (nodes - 1)];
        let compensator: Vec<f64> = (0..grid.steps())
            .map(|k| model.intensity(grid.time(k)) * grid.dt(k))
            .collect();
        for (path, &t) in tau.iter().enumerate() {
            for k in 0..nodes {
                indicator[path * nodes + k] = u8::from(t <= grid.time(k));
            }
            for k in 0..nodes - 1 {
                let jump = f64::from(indicator[path * nodes + k + 1] - indicator[path * nodes + k]);
                let alive = if grid.time(k) < t { 1.0 } else { 0.0 };
                increments[path * (nodes - 1) + k] = jump - alive * compensator[k];
            }
        }
        Self {
            nodes,
            tau,
            indicator,
            increments,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.tau.len()
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn tau(&self, path: usize) -> f64 {
        self.tau[path]
    }

    pub fn default_times(&self) -> &[f64] {
        &self.tau
    }

    /// `H_k` on one path.
    pub fn indicator(&self, path: usize) -> &[u8] {
        &self.indicator[path * self.nodes..(path + 1) * self.nodes]
    }

    /// `ΔM_k` on one path.
    pub fn increments(&self, path: usize) -> &[f64] {
        &self.increments[path * (self.nodes - 1)..(path + 1) * (self.nodes - 1)]
    }

    #[inline]
    pub fn dm(&self, path: usize, step: usize) -> f64 {
        self.increments[path * (self.nodes - 1) + step]
    }

    /// Whether the path is still alive at node `k`, i.e. `t_k < τ`.
    #[inline]
    pub fn alive(&self, path: usize, node: usize) -> bool {
        self.indicator[path * self.nodes + node] == 0
    }

    pub fn defaulted_before_horizon(&self, path: usize) -> bool {
        self.tau[path].is_finite()
    }
}

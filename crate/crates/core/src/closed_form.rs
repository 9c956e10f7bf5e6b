//! Explicit `(Y, Z, U)` for constant coefficients in one asset, with
//! deterministic compensation. Used as an oracle only.

use alloc::format;
use alloc::vec::Vec;

use crate::bsde::BsdeSolution;
use crate::claims::{Payoff, PayoffSpec};
use crate::default_model::IntensityModel;
use crate::hedging::MeasureChange;
use crate::market::MarketParams;
use crate::math::{exp, ln, norm_cdf, norm_pdf, sq, sqrt};
use crate::piecewise::PiecewiseConstant;
use crate::scenario::ScenarioSet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LyonCase {
    pub horizon: f64,
    pub rate: f64,
    pub vol: f64,
    pub lambda: f64,
    pub psi: f64,
    pub payoff: Payoff,
    pub compensation: PiecewiseConstant<f64>,
}

/// Oracle values at a pre-default state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyonValue {
    pub y: f64,
    pub z: f64,
    pub u: f64,
}

impl LyonCase {
    /// Fails with [`Error::Unsupported`] unless the market has one asset and
    /// constant `r`, `μ`, `σ`, and `λ` is constant.
    pub fn from_model(
        params: &MarketParams,
        model: &IntensityModel,
        mc: &MeasureChange,
        claim: &PayoffSpec,
    ) -> Result<Self> {
        if params.dim() != 1 {
            return Err(Error::Unsupported(format!(
                "closed form needs one asset, got {}",
                params.dim()
            )));
        }
        if !params.rate().is_constant()
            || !params.drift().is_constant()
            || !params.volatility().is_constant()
        {
            return Err(Error::Unsupported(
                "closed form needs constant market coefficients".into(),
            ));
        }
        if !model.schedule().is_constant() {
            return Err(Error::Unsupported(
                "closed form needs a constant intensity".into(),
            ));
        }
        Ok(Self {
            horizon: params.horizon(),
            rate: params.rate().values()[0],
            vol: params.volatility().values()[0].get(0, 0).abs(),
            lambda: model.schedule().values()[0],
            psi: mc.psi(),
            payoff: claim.payoff(),
            compensation: claim.compensation_schedule().clone(),
        })
    }

    /// Intensity `(1 + ψ)λ` under the pricing measure.
    pub fn pricing_intensity(&self) -> f64 {
        (1.0 + self.psi) * self.lambda
    }
}

/// Default-free value and delta of `V(S_T)` at time `t` under rate `r`.
pub fn black_scholes(payoff: Payoff, rate: f64, vol: f64, tenor: f64, spot: f64) -> (f64, f64) {
    let disc = exp(-rate * tenor);
    let forward = spot / disc;
    if tenor <= 0.0 || vol * sqrt(tenor) < 1e-14 {
        let value = disc * payoff.value(forward);
        let itm = |k: f64| forward > k;
        let delta = match payoff {
            Payoff::Constant(_) => 0.0,
            Payoff::Call(k) => itm(k) as u8 as f64,
            Payoff::Put(k) => -((forward < k) as u8 as f64),
            Payoff::Digital(_) => 0.0,
        };
        return (value, delta);
    }
    let sd = vol * sqrt(tenor);
    let d = |k: f64| {
        let d1 = (ln(forward / k) + 0.5 * sd * sd) / sd;
        (d1, d1 - sd)
    };
    match payoff {
        Payoff::Constant(c) => (c * disc, 0.0),
        Payoff::Call(k) => {
            let (d1, d2) = d(k);
            (spot * norm_cdf(d1) - k * disc * norm_cdf(d2), norm_cdf(d1))
        }
        Payoff::Put(k) => {
            let (d1, d2) = d(k);
            (
                k * disc * norm_cdf(-d2) - spot * norm_cdf(-d1),
                norm_cdf(d1) - 1.0,
            )
        }
        Payoff::Digital(k) => {
            let (_, d2) = d(k);
            (disc * norm_cdf(d2), disc * norm_pdf(d2) / (spot * sd))
        }
    }
}

/// Pre-default `(Y, Z, U)` at `(t, spot)`:
/// `Y = ∫_t^T e^{−(r+κ)(s−t)} C(s) κ ds + e^{−κ(T−t)} BS(t, spot)` with
/// `κ = (1+ψ)λ`, `Z = e^{−κ(T−t)} Δ_BS σ spot`, `U = C(t) − Y`.
pub fn lyon_value(case: &LyonCase, t: f64, spot: f64) -> LyonValue {
    let kappa = case.pricing_intensity();
    let decay = case.rate + kappa;
    let mut leg = 0.0;
    if kappa > 0.0 {
        for (lo, hi, c) in case.compensation.pieces(t, case.horizon) {
            if *c == 0.0 {
                continue;
            }
            let weight = if decay == 0.0 {
                hi - lo
            } else {
                -exp(-decay * (lo - t)) * libm::expm1(-decay * (hi - lo)) / decay
            };
            leg += c * kappa * weight;
        }
    }
    let tenor = case.horizon - t;
    let survival = exp(-kappa * tenor);
    let (bs, delta) = black_scholes(case.payoff, case.rate, case.vol, tenor, spot);
    let y = leg + survival * bs;
    LyonValue {
        y,
        z: survival * delta * case.vol * spot,
        u: case.compensation.at(t) - y,
    }
}

/// Oracle against solver, over every pre-default node before `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub y0_solver: f64,
    pub y0_oracle: f64,
    pub y0_abs: f64,
    /// `|ΔY₀| / |Y₀ oracle|`; infinite when the oracle is zero and the
    /// solver is not.
    pub y0_rel: f64,
    pub y_sup: f64,
    pub y_rms: f64,
    pub z_sup: f64,
    pub z_rms: f64,
    pub u_sup: f64,
    pub u_rms: f64,
    /// Sup discrepancies divided by the sup of the oracle, per component.
    pub y_rel_sup: f64,
    pub z_rel_sup: f64,
    pub u_rel_sup: f64,
}

pub fn lyon_vs_solver(
    case: &LyonCase,
    solution: &BsdeSolution,
    scenarios: &ScenarioSet,
) -> Result<Discrepancy> {
    if scenarios.dim() != 1 || solution.dim() != 1 {
        return Err(Error::Mismatch("closed form covers one asset only".into()));
    }
    if solution.n_paths() != scenarios.n_paths() || solution.nodes() != scenarios.grid().steps() + 1
    {
        return Err(Error::Mismatch(
            "solution shape does not match the scenarios".into(),
        ));
    }
    if (scenarios.grid().horizon() - case.horizon).abs() > crate::grid::NODE_TOLERANCE {
        return Err(Error::Mismatch(
            "scenario horizon differs from the case horizon".into(),
        ));
    }
    let grid = scenarios.grid();
    let mut sup = [0.0f64; 3];
    let mut sum2 = [0.0f64; 3];
    let mut scale = [0.0f64; 3];
    let mut count = 0usize;
    let mut cache: Vec<(f64, f64)> = Vec::new();
    for path in 0..solution.n_paths() {
        for k in 0..grid.steps() {
            if !scenarios.alive(path, k) {
                break;
            }
            let spot = scenarios.spot(path, k)[0];
            let oracle = if k == 0 {
                if cache.is_empty() {
                    let v = lyon_value(case, 0.0, spot);
                    cache.push((v.y, v.z));
                }
                let (y, z) = cache[0];
                LyonValue {
                    y,
                    z,
                    u: case.compensation.at(0.0) - y,
                }
            } else {
                lyon_value(case, grid.time(k), spot)
            };
            let diffs = [
                solution.y(path, k) - oracle.y,
                solution.z(path, k)[0] - oracle.z,
                solution.u(path, k) - oracle.u,
            ];
            let refs = [oracle.y, oracle.z, oracle.u];
            for i in 0..3 {
                sup[i] = sup[i].max(diffs[i].abs());
                sum2[i] += sq(diffs[i]);
                scale[i] = scale[i].max(refs[i].abs());
            }
            count += 1;
        }
    }
    let y0_oracle = lyon_value(case, 0.0, scenarios.spot(0, 0)[0]).y;
    let y0_solver = solution.y0();
    let y0_abs = (y0_solver - y0_oracle).abs();
    let rel = |d: f64, s: f64| {
        if s > 0.0 {
            d / s
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let rms = |s: f64| {
        if count > 0 {
            sqrt(s / count as f64)
        } else {
            0.0
        }
    };
    Ok(Discrepancy {
        y0_solver,
        y0_oracle,
        y0_abs,
        y0_rel: rel(y0_abs, y0_oracle.abs()),
        y_sup: sup[0],
        y_rms: rms(sum2[0]),
        z_sup: sup[1],
        z_rms: rms(sum2[1]),
        u_sup: sup[2],
        u_rms: rms(sum2[2]),
        y_rel_sup: rel(sup[0], scale[0]),
        z_rel_sup: rel(sup[1], scale[1]),
        u_rel_sup: rel(sup[2], scale[2]),
    })
}

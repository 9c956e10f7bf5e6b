//! Defaultable claims `ξ = V 1{τ>T} + C_τ 1{τ≤T}`.

use alloc::format;

use crate::default_model::IntensityModel;
use crate::market::MarketParams;
use crate::piecewise::PiecewiseConstant;
use crate::scenario::ScenarioSet;
use crate::{Error, Result};

/// Payoff `V` paid at `T` on survival, a function of one asset's `S_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff {
    Constant(f64),
    Call(f64),
    Put(f64),
    /// Cash-or-nothing: pays 1 when `S_T > K`.
    Digital(f64),
}

impl Payoff {
    pub fn value(&self, spot: f64) -> f64 {
        match *self {
            Payoff::Constant(c) => c,
            Payoff::Call(k) => (spot - k).max(0.0),
            Payoff::Put(k) => (k - spot).max(0.0),
            Payoff::Digital(k) => {
                if spot > k {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match *self {
            Payoff::Constant(_) => None,
            Payoff::Call(k) | Payoff::Put(k) | Payoff::Digital(k) => Some(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec {
    payoff: Payoff,
    compensation: PiecewiseConstant<f64>,
    underlying: usize,
}

impl PayoffSpec {
    /// Claim on asset 0 paying `payoff` on survival and `compensation(τ)` on default.
    pub fn new(payoff: Payoff, compensation: PiecewiseConstant<f64>) -> Result<Self> {
        if let Some(k) = payoff.strike() {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidClaim(format!("strike {k} must be positive")));
            }
        }
        if let Payoff::Constant(c) = payoff {
            if !c.is_finite() {
                return Err(Error::InvalidClaim("constant payoff must be finite".into()));
            }
        }
        for (t, c) in compensation.breakpoints().iter().zip(compensation.values()) {
            if !(*c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidClaim(format!(
                    "compensation {c} at t={t} must be finite and >= 0"
                )));
            }
        }
        Ok(Self {
            payoff,
            compensation,
            underlying: 0,
        })
    }

    /// Claim written on asset `index` instead of asset 0.
    pub fn on_asset(mut self, index: usize) -> Self {
        self.underlying = index;
        self
    }

    /// Pure survival claim `1{τ>T}`: the defaultable zero-coupon.
    pub fn zero_coupon() -> Self {
        Self::new(Payoff::Constant(1.0), PiecewiseConstant::constant(0.0)).expect("valid claim")
    }

    pub fn payoff(&self) -> Payoff {
        self.payoff
    }

    pub fn compensation_schedule(&self) -> &PiecewiseConstant<f64> {
        &self.compensation
    }

    pub fn underlying(&self) -> usize {
        self.underlying
    }

    pub fn survival_value(&self, terminal_spot: &[f64]) -> f64 {
        self.payoff.value(terminal_spot[self.underlying])
    }

    pub fn compensation(&self, t: f64) -> f64 {
        *self.compensation.at(t)
    }

    /// `ξ` given `S_T` and the default time.
    pub fn value(&self, terminal_spot: &[f64], tau: f64, horizon: f64) -> f64 {
        if tau > horizon {
            self.survival_value(terminal_spot)
        } else {
            self.compensation(tau)
        }
    }

    /// `ξ` on one scenario path, with `C` taken at the exact default time.
    pub fn terminal_payoff(&self, scenarios: &ScenarioSet, path: usize) -> f64 {
        self.value(
            scenarios.terminal_spot(path),
            scenarios.tau(path),
            scenarios.grid().horizon(),
        )
    }

    /// `R_{T∧τ} ξ`.
    pub fn discounted_payoff(
        &self,
        scenarios: &ScenarioSet,
        path: usize,
        params: &MarketParams,
    ) -> f64 {
        let stop = scenarios.tau(path).min(scenarios.grid().horizon());
        params.discount_factor(stop) * self.terminal_payoff(scenarios, path)
    }

    /// `E[C_τ 1{a < τ ≤ b} | τ > a]` under `intensity`, exact for
    /// piecewise-constant `C` and `λ`.
    pub fn expected_compensation(&self, intensity: &IntensityModel, a: f64, b: f64) -> f64 {
        let schedule = intensity.schedule();
        let mut total = 0.0;
        for (lo, hi, c) in self.compensation.pieces(a, b) {
            if *c == 0.0 {
                continue;
            }
            for (l2, h2, _) in schedule.pieces(lo, hi) {
                total += c
                    * (intensity.conditional_survival(a, l2)
                        - intensity.conditional_survival(a, h2));
            }
        }
        total
    }
}

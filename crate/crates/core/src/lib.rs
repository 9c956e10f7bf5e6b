//! Pricing and hedging of defaultable contingent claims through backward
//! stochastic differential equations stopped at `T ∧ τ`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: coefficient models, scenario simulation, the regression
//! based BSDE solvers, strategy extraction and the analytic reference
//! values used to check them. File formats and the command line live in
//! the companion `dbsde` crate.
//!
//! The pieces, bottom-up:
//!
//! * [`market`]: default-free coefficients `r`, `μ`, `σ`, admissibility
//!   checks and exact log-normal path simulation.
//! * [`default_model`]: deterministic intensity, conditional law of the
//!   default time, inverse-hazard sampling and compensated increments.
//! * [`scenario`]: the joint scenario set fed to the solvers.
//! * [`claims`]: the terminal condition `ξ = V 1{τ>T} + C_τ 1{τ≤T}`.
//! * [`regression`]: least-squares conditional expectations.
//! * [`bsde`]: backward induction, Picard iteration and norm diagnostics.
//! * [`hedging`]: the hedging driver, defaultable zero-coupon, strategy
//!   extraction and forward replication.
//! * [`closed_form`]: explicit `(Y, Z, U)` for constant coefficients.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bsde;
pub mod claims;
pub mod closed_form;
pub mod default_model;
mod error;
pub mod grid;
pub mod hedging;
pub mod linalg;
pub mod market;
mod math;
pub mod piecewise;
pub mod regression;
mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use piecewise::PiecewiseConstant;

//! Stopped BSDE
//! `Y_{t∧τ} = ξ + ∫_{t∧τ}^{T∧τ} f(s, Y, Z, U) ds − ∫ Z dW − ∫ U dM`
//! solved on a scenario set.
//!
//! Both solvers work on the pre-default value as a function of the asset
//! state. The default clock is independent of the Brownian motion and has a
//! deterministic intensity, so the conditional expectation over one step
//! splits exactly into a survival branch (probability
//! `p_k = exp(−∫_{t_k}^{t_{k+1}} λ)`, regressed on the log-prices) and a
//! default branch (`E[C_τ 1{τ ≤ t_{k+1}} | τ > t_k]`, computed in closed
//! form). The jump coefficient is `U_k = C(t_k) − Y_k` before default. The
//! realised default times then stop each path: on `{t_k ≥ T∧τ}` the solution
//! is `(ξ, 0, 0)`.

mod backward;
mod diagnostics;
mod driver;
mod picard;
mod solution;

pub use backward::solve_backward;
pub use diagnostics::{
    apriori_bound_check, gamma_norm, step_residuals, y0_control_variate, y0_estimate, AprioriBound,
    Estimate, ResidualStats,
};
pub use driver::{check_lipschitz, zero_driver, Driver, FnDriver};
pub use picard::{picard_solve, PicardOutcome};
pub use solution::{BsdeProblem, BsdeSolution, PicardConfig, SolverConfig};

/// Picard weight `γ = 4K² + 2K + 1` under which the solution map contracts
/// with factor ½.
pub fn contraction_gamma(k: f64) -> f64 {
    4.0 * k * k + 2.0 * k + 1.0
}

/// Threshold `1 + 3K + K²` that `γ` must exceed in the a-priori estimate.
pub fn apriori_gamma_threshold(k: f64) -> f64 {
    1.0 + 3.0 * k + k * k
}

//! Marginal density estimators: kernel, exp-polynomial Poisson
//! regression, nonparametric MLE mixture, and penalized score matching.

mod histogram;
mod kde;
mod lindsey;
mod npmle;
mod scorematch;

pub use histogram::{bin_observations, HistogramBinning};
pub use kde::{fit_kde, silverman_bandwidth};
pub use lindsey::fit_lindsey;
pub use npmle::{fit_npmle_em, fit_npmle_em_traced, npmle_support_grid};
pub use scorematch::{fit_scorematch, tune_rho_by_sure, ScoreMatchConfig};

use serde::{Deserialize, Serialize};

/// Outcome of an iterative fit. Non-convergence is reported, not thrown;
/// `converged` implies `constraint_violation <=` the configured KKT
/// tolerance for constrained fits (zero for the unconstrained ones).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    /// Method-specific objective at exit: Poisson deviance for the
    /// histogram regression, total log-likelihood for EM, the quadratic
    /// objective for score matching, negative cross-entropy proxy for KDE.
    pub final_objective: f64,
    pub converged: bool,
    pub constraint_violation: f64,
}

//! Reference values for the closed-form corrections: Gauss–Hermite
//! quadrature of the expected score equations, and seeded Monte Carlo.

pub mod montecarlo;
pub mod quadrature;
pub mod sampling;

use serde::{Deserialize, Serialize};

use crate::bias::LeastFalse;
use crate::covariate::{CovariateModel, TrueModel};
use crate::error::{Error, Result};

pub use montecarlo::{monte_carlo_least_false, JACKKNIFE_BLOCKS, MIN_MC_N};
pub use quadrature::{gauss_hermite, quadrature_least_false, DEFAULT_NODES};
pub use sampling::{
    delivered_correlation, derive_seed, latent_correlation, sample_covariates, CovariateLaw,
    CovariateSampler, ScenarioSpec, DEFAULT_N, DEFAULT_SEED, LOGNORMAL_SIGMA2,
};

/// Oracle estimate of the least-false values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub least_false: LeastFalse<f64>,
    /// Coefficient of the binary covariate, when the model has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_star: Option<f64>,
    /// Jackknife standard errors, Monte Carlo only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_std_error: Option<Vec<f64>>,
    /// Simulated rows, or quadrature points per arm.
    pub n_effective: usize,
    /// Observed proportion of `Y = 1`, Monte Carlo only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event_rate: Option<f64>,
}

impl OracleResult {
    /// Standard error of `α*`, when available.
    pub fn alpha_std_error(&self) -> Option<f64> {
        self.mc_std_error.as_ref().map(|se| se[1])
    }
}

/// Quadrature for a scenario; refuses non-Gaussian covariate laws.
pub fn quadrature_for_scenario(spec: &ScenarioSpec, nodes: usize) -> Result<OracleResult> {
    if !spec.covariate_law.is_normal() {
        return Err(Error::contract(format!(
            "quadrature assumes Normal covariates; use monte_carlo_least_false for the {} law",
            spec.covariate_law.label()
        )));
    }
    if spec.fitted_link != spec.true_model.link {
        return Err(Error::contract("quadrature fits with the generating link only"));
    }
    quadrature_least_false(&spec.true_model, &spec.cov, nodes)
}

/// Arm-wise response probabilities `(P₊, P₋)` from the probit surrogate,
/// for checking that a scenario has trial-like event rates.
pub fn outcome_probability_check(
    model: &TrueModel<f64>,
    cov: &CovariateModel<f64>,
) -> Result<(f64, f64)> {
    crate::bias::outcome_probabilities(model, cov)
}

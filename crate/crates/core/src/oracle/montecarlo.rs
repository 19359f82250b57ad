//! Least-false values by fitting the reduced model to one large simulated
//! trial, with delete-a-block jackknife standard errors.

use rayon::prelude::*;

use crate::bias::{LeastFalse, Method};
use crate::error::{Error, Result};
use crate::glm::{fit_excluding, fit_with, Dataset, FitOptions};
use crate::linalg::Matrix;

use super::sampling::{simulate, ScenarioSpec};
use super::OracleResult;

pub const MIN_MC_N: usize = 10_000;
pub const JACKKNIFE_BLOCKS: usize = 20;

fn context(spec: &ScenarioSpec) -> String {
    format!(
        "monte carlo scenario (link {}, fitted {}, law {}, n {}, seed {})",
        spec.true_model.link,
        spec.fitted_link,
        spec.covariate_law.label(),
        spec.n,
        spec.seed
    )
}

/// Design of the reduced model: intercept, treatment, `B` when present, then
/// the fitted covariates.
fn reduced_dataset(spec: &ScenarioSpec) -> Result<Dataset<f64>> {
    let n = spec.n;
    let draws = simulate(spec, n, true)?;
    let d = spec.cov.dim();
    let p = spec.cov.p();
    let has_b = spec.true_model.binary_block.is_some();
    let k = 2 + usize::from(has_b) + p;
    let mut design = Vec::with_capacity(n * k);
    for i in 0..n {
        design.push(1.0);
        design.push(draws.t[i]);
        if has_b {
            design.push(draws.b[i]);
        }
        design.extend_from_slice(&draws.x[i * d..i * d + p]);
    }
    Dataset::new(draws.y, Matrix::from_row_major(n, k, design)?)
}

/// Contiguous jackknife blocks covering `0..n`.
fn blocks(n: usize, count: usize) -> Vec<std::ops::Range<usize>> {
    (0..count).map(|b| b * n / count..(b + 1) * n / count).collect()
}

fn run(spec: &ScenarioSpec) -> Result<OracleResult> {
    spec.validate()?;
    if spec.n < MIN_MC_N {
        return Err(Error::contract(format!(
            "monte carlo oracle needs n >= {MIN_MC_N}, got {}",
            spec.n
        )));
    }
    if spec.true_model.binary_block.is_some() && !spec.cov.is_randomized() {
        return Err(Error::contract(
            "with a binary covariate the covariate means must not depend on treatment",
        ));
    }
    let data = reduced_dataset(spec)?;
    let link = spec.fitted_link;
    let full = fit_with(&data, link, &FitOptions::default())?;
    if !full.converged {
        return Err(Error::Convergence {
            solver: "IRLS",
            iterations: full.iterations,
            residual: full.max_score,
        });
    }
    let warm = FitOptions {
        start: Some(full.coefficients.clone()),
        ..FitOptions::default()
    };
    let replicates: Vec<Vec<f64>> = blocks(data.n(), JACKKNIFE_BLOCKS)
        .into_par_iter()
        .map(|skip| {
            let r = fit_excluding(&data, link, &warm, skip)?;
            if r.converged {
                Ok(r.coefficients)
            } else {
                Err(Error::Convergence {
                    solver: "IRLS jackknife refit",
                    iterations: r.iterations,
                    residual: r.max_score,
                })
            }
        })
        .collect::<Result<_>>()?;
    let k = data.k();
    let nb = JACKKNIFE_BLOCKS as f64;
    let se: Vec<f64> = (0..k)
        .map(|j| {
            let mean = replicates.iter().map(|r| r[j]).sum::<f64>() / nb;
            let ss: f64 = replicates.iter().map(|r| (r[j] - mean).powi(2)).sum();
            ((nb - 1.0) / nb * ss).sqrt()
        })
        .collect();
    let coef = full.coefficients;
    let has_b = spec.true_model.binary_block.is_some();
    let first_beta = 2 + usize::from(has_b);
    Ok(OracleResult {
        least_false: LeastFalse {
            mu_star: Some(coef[0]),
            alpha_star: coef[1],
            beta1_star: Some(coef[first_beta..].to_vec()),
            method: Method::MonteCarloOracle,
            link,
        },
        gamma_star: has_b.then(|| coef[2]),
        mc_std_error: Some(se),
        n_effective: data.n(),
        event_rate: Some(data.event_rate()),
    })
}

/// Simulates the scenario, fits the reduced model and returns its
/// coefficients with jackknife standard errors over 20 contiguous blocks.
///
/// Standard errors are ordered as the coefficients: `μ*`, `α*`, `γ*` when a
/// binary covariate is present, then `β₁*`.
pub fn monte_carlo_least_false(spec: &ScenarioSpec) -> Result<OracleResult> {
    run(spec).map_err(|e| e.in_scenario(context(spec)))
}

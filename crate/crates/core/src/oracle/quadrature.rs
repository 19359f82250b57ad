//! Deterministic least-false values for Gaussian covariates.
//!
//! Conditional on the arm, the reduced linear predictor depends on `X` only
//! through `s = β₁*ᵀX₁` and the true one through `w = βᵀX`, a bivariate
//! Normal pair. Expectations against `X₁` itself reduce to expectations of
//! partial derivatives in `(s, w)` by Stein's identity, so every score
//! equation is a two-dimensional Gauss–Hermite sum.

use crate::bias::{LeastFalse, Method};
use crate::covariate::{CovariateModel, Link, TrueModel};
use crate::error::{Error, Result};
use crate::linalg::{dot, lu_solve};
use crate::specfun::{expit_unchecked, norm_cdf, norm_hazard, norm_pdf, probit_weight};

use super::OracleResult;

pub const DEFAULT_NODES: usize = 80;
pub const MIN_NODES: usize = 20;
const RESIDUAL_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 60;

/// Gauss–Hermite rule for `E f(Z)`, `Z ~ N(0, 1)`: nodes and weights summing
/// to one.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::contract("Gauss-Hermite rule needs at least one node"));
    }
    // Newton iteration on the orthonormal Hermite recurrence for weight
    // exp(-x²), with asymptotic starting guesses for the largest roots.
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 3e-14 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                solver: "Gauss-Hermite root",
                iterations: 100,
                residual: f64::NAN,
            });
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let nodes = x.iter().rev().map(|v| v * sqrt2).collect();
    let weights = w.iter().rev().map(|v| v * inv_sqrt_pi).collect();
    Ok((nodes, weights))
}

/// Expectations `E h`, `E ∂ₛh`, `E ∂_w h` for one arm.
#[derive(Clone, Copy, Default)]
struct ArmMoments {
    h: f64,
    ds: f64,
    dw: f64,
}

/// Score kernel `h(η*, η)` and its partials, by link.
fn kernel(link: Link, eta_star: f64, eta: f64) -> (f64, f64, f64) {
    match link {
        Link::Logistic => {
            let fs = expit_unchecked(eta_star);
            let f = expit_unchecked(eta);
            let ds = fs * expit_unchecked(-eta_star);
            let dw = f * expit_unchecked(-eta);
            (f - fs, -ds, dw)
        }
        Link::Probit => {
            let omega = probit_weight(eta_star);
            let gap = norm_cdf(eta) - norm_cdf(eta_star);
            // d log ω / dη = −η − φ/Φ + φ/(1−Φ)
            let dlog = -eta_star - norm_hazard(-eta_star) + norm_hazard(eta_star);
            let h = omega * gap;
            (h, h * dlog - omega * norm_pdf(eta_star), omega * norm_pdf(eta))
        }
    }
}

struct Problem<'a> {
    model: &'a TrueModel<f64>,
    cov: &'a CovariateModel<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    beta: Vec<f64>,
    /// `(Ωβ)₁`
    omega_beta1: Vec<f64>,
    var_w: f64,
}

impl<'a> Problem<'a> {
    fn new(model: &'a TrueModel<f64>, cov: &'a CovariateModel<f64>, n: usize) -> Result<Self> {
        let (nodes, weights) = gauss_hermite(n)?;
        let beta = model.beta();
        let omega_beta = cov.omega().matvec(&beta)?;
        let var_w = dot(&beta, &omega_beta).max(0.0);
        Ok(Problem {
            model,
            cov,
            nodes,
            weights,
            omega_beta1: omega_beta[..cov.p()].to_vec(),
            beta,
            var_w,
        })
    }

    fn arm(&self, theta: &[f64], t: f64, plus: bool) -> ArmMoments {
        let p = self.cov.p();
        let (mu_s, alpha_s, b1s) = (theta[0], theta[1], &theta[2..]);
        let nu = self.cov.nu(plus);
        let omega11_b1s: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|j| self.cov.omega()[(i, j)] * b1s[j]).sum())
            .collect();
        let var_s = dot(b1s, &omega11_b1s).max(0.0);
        let cov_sw = dot(b1s, &self.omega_beta1);
        let (sd_s, sd_w) = (var_s.sqrt(), self.var_w.sqrt());
        let rho = if sd_s > 0.0 && sd_w > 0.0 {
            (cov_sw / (sd_s * sd_w)).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
        let loc_s = mu_s + t * alpha_s + dot(b1s, &nu[..p]);
        let loc_w = self.model.mu + t * self.model.alpha + dot(&self.beta, nu);
        let mut acc = ArmMoments::default();
        for (&z1, &w1) in self.nodes.iter().zip(&self.weights) {
            let eta_star = loc_s + sd_s * z1;
            let base_w = loc_w + sd_w * rho * z1;
            let mut inner = ArmMoments::default();
            for (&z2, &w2) in self.nodes.iter().zip(&self.weights) {
                let (h, ds, dw) = kernel(self.model.link, eta_star, base_w + sd_w * rho_c * z2);
                inner.h += w2 * h;
                inner.ds += w2 * ds;
                inner.dw += w2 * dw;
            }
            acc.h += w1 * inner.h;
            acc.ds += w1 * inner.ds;
            acc.dw += w1 * inner.dw;
        }
        acc
    }

    /// Expected score of the reduced model at `theta = (μ*, α*, β₁*)`.
    fn residual(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.cov.p();
        let b1s = &theta[2..];
        let mut r = vec![0.0; p + 2];
        let pt = self.cov.p_treat();
        for (t, plus, weight) in [(1.0, true, pt), (-1.0, false, 1.0 - pt)] {
            let m = self.arm(theta, t, plus);
            let nu1 = &self.cov.nu(plus)[..p];
            r[0] += weight * m.h;
            r[1] += weight * t * m.h;
            for i in 0..p {
                let omega11_b1s: f64 = (0..p).map(|j| self.cov.omega()[(i, j)] * b1s[j]).sum();
                r[2 + i] += weight * (nu1[i] * m.h + omega11_b1s * m.ds + self.omega_beta1[i] * m.dw);
            }
        }
        r
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Least-false values by Gauss–Hermite quadrature of the expected score
/// equations with the exact link, solved by damped Newton started from the
/// generating coefficients.
pub fn quadrature_least_false(
    model: &TrueModel<f64>,
    cov: &CovariateModel<f64>,
    nodes: usize,
) -> Result<OracleResult> {
    model.validate(cov)?;
    if nodes < MIN_NODES {
        return Err(Error::contract(format!(
            "quadrature needs at least {MIN_NODES} nodes per dimension, got {nodes}"
        )));
    }
    if model.binary_block.is_some() {
        return Err(Error::contract(
            "quadrature oracle does not model a binary covariate; use monte_carlo_least_false",
        ));
    }
    let mut theta: Vec<f64> = [model.mu, model.alpha].into_iter().chain(model.beta1.iter().copied()).collect();
    let problem = Problem::new(model, cov, nodes)?;
    let dim = theta.len();
    let mut r = problem.residual(&theta);
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    while norm >= RESIDUAL_TOL {
        if iterations == MAX_NEWTON {
            return Err(Error::Convergence {
                solver: "quadrature Newton",
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let mut jac = crate::linalg::Matrix::zeros(dim, dim);
        for j in 0..dim {
            let step = 1e-6 * theta[j].abs().max(1.0);
            let mut hi = theta.clone();
            let mut lo = theta.clone();
            hi[j] += step;
            lo[j] -= step;
            let (rh, rl) = (problem.residual(&hi), problem.residual(&lo));
            for i in 0..dim {
                jac[(i, j)] = (rh[i] - rl[i]) / (2.0 * step);
            }
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = lu_solve(&jac, &neg)?;
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + scale * d).collect();
            let rc = problem.residual(&cand);
            let nc = inf_norm(&rc);
            if nc < norm {
                theta = cand;
                r = rc;
                norm = nc;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            return Err(Error::Convergence {
                solver: "quadrature Newton",
                iterations,
                residual: norm,
            });
        }
    }
    let beta1_star = theta[2..].to_vec();
    Ok(OracleResult {
        least_false: LeastFalse {
            mu_star: Some(theta[0]),
            alpha_star: theta[1],
            beta1_star: Some(beta1_star),
            method: Method::QuadratureOracle,
            link: model.link,
        },
        gamma_star: None,
        mc_std_error: None,
        n_effective: nodes * nodes,
        event_rate: None,
    })
}

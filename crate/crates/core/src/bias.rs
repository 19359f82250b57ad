//! Closed-form least-false values of the reduced regression.
//!
//! Every approximation here couples to the omitted covariates only through
//! the scalar `v = β₂ᵀΩ̃β₂` (plus location terms for the Owen-T route):
//!
//! * skew-Normal: `α* = α / √(1 + c²v)` in a randomized trial, with the
//!   general unequal-mean forms for `μ*`, `α*` and `β₁*`;
//! * probit: the same expressions with `c²` dropped, which are exact;
//! * Gail: second-order Taylor expansion in `β₂ᵀX₂`, only without fitted
//!   covariates and deliberately left unclamped;
//! * Neuhaus: `α·T(h, a)/T(h, 1)` with Owen's T function.

use serde::{Deserialize, Serialize};

use crate::covariate::{
    radical_from_variance, total_variance, CovariateModel, Link, Partition, TrueModel,
};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::scalar::{lit, Real};
use crate::specfun::{expit_unchecked, logit, norm_cdf, owen_t_scaled, probit_logit_constant};

/// Route that produced a set of least-false values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SkewNormal,
    Gail,
    Neuhaus,
    ProbitExact,
    QuadratureOracle,
    MonteCarloOracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::SkewNormal => "skew_normal",
            Method::Gail => "gail",
            Method::Neuhaus => "neuhaus",
            Method::ProbitExact => "probit_exact",
            Method::QuadratureOracle => "quadrature_oracle",
            Method::MonteCarloOracle => "monte_carlo_oracle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Limit `(μ*, α*, β₁*)` of the reduced-model estimates.
///
/// Methods that only speak to the treatment effect leave `mu_star` and
/// `beta1_star` unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct LeastFalse<T> {
    pub mu_star: Option<T>,
    pub alpha_star: T,
    pub beta1_star: Option<Vec<T>>,
    pub method: Method,
    pub link: Link,
}

impl<T: Real> LeastFalse<T> {
    fn alpha_only(alpha_star: T, method: Method, link: Link) -> Self {
        LeastFalse {
            mu_star: None,
            alpha_star,
            beta1_star: None,
            method,
            link,
        }
    }
}

fn require_link<T: Real>(model: &TrueModel<T>, link: Link, op: &str) -> Result<()> {
    if model.link != link {
        return Err(Error::contract(format!(
            "{op} requires a {link} model, got {}",
            model.link
        )));
    }
    Ok(())
}

/// Shared body of the skew-Normal and probit routes.
fn esn_least_false<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
    method: Method,
) -> Result<LeastFalse<T>> {
    model.validate(cov)?;
    let part = Partition::new(cov)?;
    let v = part.omitted_variance(&model.beta2)?;
    let q_tilde = radical_from_variance(v, model.link);
    let beta1_star = part
        .absorbed_beta1(&model.beta1, &model.beta2)?
        .into_iter()
        .map(|b| b / q_tilde)
        .collect();
    let half = lit::<T>(0.5);
    let shift_plus = part.residual_mean_shift(&model.beta2, cov.nu_plus())?;
    let shift_minus = part.residual_mean_shift(&model.beta2, cov.nu_minus())?;
    let mu_star = (model.mu + half * (shift_plus + shift_minus)) / q_tilde;
    let alpha_star = (model.alpha + half * (shift_plus - shift_minus)) / q_tilde;
    Ok(LeastFalse {
        mu_star: Some(mu_star),
        alpha_star,
        beta1_star: Some(beta1_star),
        method,
        link: model.link,
    })
}

/// Skew-Normal least-false values for a logistic model.
pub fn skew_normal_least_false<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
) -> Result<LeastFalse<T>> {
    require_link(model, Link::Logistic, "skew_normal_least_false")?;
    esn_least_false(model, cov, Method::SkewNormal)
}

/// Exact least-false values for a probit model with Normal covariates.
pub fn probit_least_false<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
) -> Result<LeastFalse<T>> {
    require_link(model, Link::Probit, "probit_least_false")?;
    esn_least_false(model, cov, Method::ProbitExact)
}

/// Gail's small-`β₂` approximation of `α*`; defined only when no continuous
/// covariates are fitted.
///
/// Logistic: `α − ½β₂ᵀΩ₂₂β₂·(expit(μ+α) − expit(μ−α))`.
/// Probit: `α(1 − ½β₂ᵀΩ₂₂β₂)`.
/// Large `β₂` can push the result past zero; this is reported as is.
pub fn gail_least_false_alpha<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
) -> Result<LeastFalse<T>> {
    model.validate(cov)?;
    if cov.p() != 0 {
        return Err(Error::contract(format!(
            "Gail's method covers only models without fitted covariates (p = 0), got p = {}",
            cov.p()
        )));
    }
    let v = cov.omega().quadratic_form(&model.beta2)?;
    let half = lit::<T>(0.5);
    let alpha_star = match model.link {
        Link::Logistic => {
            let spread =
                expit_unchecked(model.mu + model.alpha) - expit_unchecked(model.mu - model.alpha);
            model.alpha - half * v * spread
        }
        Link::Probit => model.alpha * (T::one() - half * v),
    };
    Ok(LeastFalse::alpha_only(alpha_star, Method::Gail, model.link))
}

/// Owen-T correction factor `T(h, a) / T(h, 1)` for `a ∈ (0, 1]`.
pub fn neuhaus_factor<T: Real>(h: T, a: T) -> Result<T> {
    if !h.is_finite() || !(a > T::zero() && a <= T::one()) {
        return Err(Error::contract(format!(
            "neuhaus_factor needs finite h and a in (0, 1], got h = {h}, a = {a}"
        )));
    }
    if a == T::one() {
        return Ok(T::one());
    }
    // the common factor exp(-h²/2)/2π cancels
    Ok((owen_t_scaled(h, a) / owen_t_scaled(h, T::one())).min(T::one()))
}

/// `(h, a)` of the Owen-T correction for a linear-predictor location `loc`
/// and omitted variance `v` (logistic scale).
fn neuhaus_arguments<T: Real>(loc: T, v: T) -> (T, T) {
    let c: T = probit_logit_constant();
    let c2v = c * c * v;
    let h = c * loc / (T::one() + c2v).sqrt();
    let a = (T::one() + lit::<T>(2.0) * c2v).sqrt().recip();
    (h, a)
}

/// Neuhaus-type `α*` for a logistic model.
///
/// With fitted covariates the conditional variance `Ω̃` replaces `Ω₂₂` and
/// `X₁` is fixed at its mean, so `h = c(μ + βᵀν)/√(1 + c²v)`.
pub fn neuhaus_least_false_alpha<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
) -> Result<LeastFalse<T>> {
    require_link(model, Link::Logistic, "neuhaus_least_false_alpha")?;
    model.validate(cov)?;
    let v = Partition::new(cov)?.omitted_variance(&model.beta2)?;
    let nu = cov.marginal_mean();
    let loc = model.mu + dot(&model.beta(), &nu);
    let (h, a) = neuhaus_arguments(loc, v);
    let factor = neuhaus_factor(h, a)?;
    Ok(LeastFalse::alpha_only(model.alpha * factor, Method::Neuhaus, model.link))
}

/// Neuhaus-type `α*` evaluated at a specific fitted-covariate value `x1`
/// instead of its mean.
pub fn neuhaus_alpha_at<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
    x1: &[T],
) -> Result<T> {
    require_link(model, Link::Logistic, "neuhaus_alpha_at")?;
    model.validate(cov)?;
    if x1.len() != cov.p() {
        return Err(Error::Dimension {
            what: "x1 length",
            expected: cov.p(),
            got: x1.len(),
        });
    }
    let part = Partition::new(cov)?;
    let v = part.omitted_variance(&model.beta2)?;
    let nu = cov.marginal_mean();
    let (nu1, nu2) = nu.split_at(cov.p());
    let centred: Vec<T> = x1.iter().zip(nu1).map(|(&x, &m)| x - m).collect();
    let projected = part.regression.transpose().matvec(&centred)?;
    let cond_mean: Vec<T> = nu2.iter().zip(&projected).map(|(&a, &b)| a + b).collect();
    let loc = model.mu + dot(&model.beta1, x1) + dot(&model.beta2, &cond_mean);
    let (h, a) = neuhaus_arguments(loc, v);
    Ok(model.alpha * neuhaus_factor(h, a)?)
}

/// Probit `H'(0)` factor, `1/√(1 + β₂ᵀΩ̃β₂)`.
///
/// This coincides with the probit skew-Normal attenuation factor.
pub fn probit_neuhaus_hprime<T: Real>(model: &TrueModel<T>, cov: &CovariateModel<T>) -> Result<T> {
    require_link(model, Link::Probit, "probit_neuhaus_hprime")?;
    model.validate(cov)?;
    let v = Partition::new(cov)?.omitted_variance(&model.beta2)?;
    Ok(radical_from_variance(v, Link::Probit).recip())
}

/// Least-false values when the model carries a non-treatment binary
/// covariate `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct BinaryLeastFalse<T> {
    pub mu_star: T,
    pub alpha_star: T,
    pub gamma_star: T,
    pub beta1_star: Vec<T>,
    pub link: Link,
}

/// Extension with a single binary covariate `B ∈ {−1, +1}` independent of
/// treatment; `E(X | B = b) = ν_b` with a common dispersion. Exact for probit.
pub fn binary_covariate_least_false<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
) -> Result<BinaryLeastFalse<T>> {
    model.validate(cov)?;
    let block = model
        .binary_block
        .as_ref()
        .ok_or_else(|| Error::contract("binary_covariate_least_false needs a binary_block"))?;
    let part = Partition::new(cov)?;
    let v = part.omitted_variance(&model.beta2)?;
    let q_tilde = radical_from_variance(v, model.link);
    let half = lit::<T>(0.5);
    let shift_plus = part.residual_mean_shift(&model.beta2, &block.nu_b_plus)?;
    let shift_minus = part.residual_mean_shift(&model.beta2, &block.nu_b_minus)?;
    let beta1_star = part
        .absorbed_beta1(&model.beta1, &model.beta2)?
        .into_iter()
        .map(|b| b / q_tilde)
        .collect();
    Ok(BinaryLeastFalse {
        mu_star: (model.mu + half * (shift_plus + shift_minus)) / q_tilde,
        alpha_star: model.alpha / q_tilde,
        gamma_star: (block.gamma + half * (shift_plus - shift_minus)) / q_tilde,
        beta1_star,
        link: model.link,
    })
}

/// Owen-T correction factor against the typical response probability
/// `P = expit(μ + β₂ᵀν₂)` for a fixed skew-Normal factor `q̃⁻¹`.
pub fn figure1_curve<T: Real>(q_tilde_inv: T, p_grid: &[T]) -> Result<Vec<(T, T)>> {
    if !(q_tilde_inv > T::zero() && q_tilde_inv <= T::one()) {
        return Err(Error::contract(format!(
            "q_tilde_inv = {q_tilde_inv} outside (0, 1]"
        )));
    }
    let c: T = probit_logit_constant();
    let q_tilde = q_tilde_inv.recip();
    let a = (lit::<T>(2.0) * q_tilde * q_tilde - T::one()).sqrt().recip();
    p_grid
        .iter()
        .map(|&p| {
            if !(p > T::zero() && p < T::one()) {
                return Err(Error::contract(format!("grid value {p} outside (0, 1)")));
            }
            let h = c * logit(p)? * q_tilde_inv;
            Ok((p, neuhaus_factor(h, a)?))
        })
        .collect()
}

/// Marginal response probabilities `(P₊, P₋)` of the two arms from the
/// probit surrogate (exact for probit models with Normal covariates).
pub fn outcome_probabilities<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
) -> Result<(T, T)> {
    model.validate(cov)?;
    let beta = model.beta();
    let scale = match model.link {
        Link::Logistic => probit_logit_constant(),
        Link::Probit => T::one(),
    };
    let denom = (T::one() + scale * scale * total_variance(model, cov)?).sqrt();
    let arm = |t: T, nu: &[T]| norm_cdf(scale * (model.mu + t * model.alpha + dot(&beta, nu)) / denom);
    Ok((arm(T::one(), cov.nu_plus()), arm(-T::one(), cov.nu_minus())))
}

/// All applicable closed-form corrections for one model pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct CorrectionReport<T> {
    pub link: Link,
    pub alpha: T,
    /// `β₂ᵀΩ̃β₂`
    pub omitted_variance: T,
    pub q_tilde: T,
    pub outcome_prob_plus: T,
    pub outcome_prob_minus: T,
    pub estimates: Vec<LeastFalse<T>>,
}

impl<T: Real> CorrectionReport<T> {
    pub fn alpha_for(&self, method: Method) -> Option<T> {
        self.estimates
            .iter()
            .find(|e| e.method == method)
            .map(|e| e.alpha_star)
    }
}

/// Runs every closed-form method that applies to `model`.
///
/// Logistic models get skew-Normal, Neuhaus and (for `p = 0`) Gail; probit
/// models get the exact result, the `H'(0)` factor and (for `p = 0`) Gail.
pub fn correction_report<T: Real>(
    model: &TrueModel<T>,
    cov: &CovariateModel<T>,
) -> Result<CorrectionReport<T>> {
    model.validate(cov)?;
    let v = Partition::new(cov)?.omitted_variance(&model.beta2)?;
    let mut estimates = Vec::new();
    match model.link {
        Link::Logistic => {
            estimates.push(skew_normal_least_false(model, cov)?);
            if cov.p() == 0 {
                estimates.push(gail_least_false_alpha(model, cov)?);
            }
            estimates.push(neuhaus_least_false_alpha(model, cov)?);
        }
        Link::Probit => {
            estimates.push(probit_least_false(model, cov)?);
            if cov.p() == 0 {
                estimates.push(gail_least_false_alpha(model, cov)?);
            }
            let factor = probit_neuhaus_hprime(model, cov)?;
            estimates.push(LeastFalse::alpha_only(
                model.alpha * factor,
                Method::Neuhaus,
                Link::Probit,
            ));
        }
    }
    let (pp, pm) = outcome_probabilities(model, cov)?;
    Ok(CorrectionReport {
        link: model.link,
        alpha: model.alpha,
        omitted_variance: v,
        q_tilde: radical_from_variance(v, model.link),
        outcome_prob_plus: pp,
        outcome_prob_minus: pm,
        estimates,
    })
}

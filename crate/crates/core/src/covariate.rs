//! Joint covariate law of a two-arm trial, its fitted/omitted partition, and
//! the conditional dispersion every bias formula consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::{lit, Real};
use crate::specfun::probit_logit_constant;

/// Link function of a binary regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Logistic,
    Probit,
}

impl Link {
    /// Squared scale on the omitted-variance term of the attenuation radical.
    pub fn radical_scale<T: Real>(self) -> T {
        match self {
            Link::Logistic => {
                let c: T = probit_logit_constant();
                c * c
            }
            Link::Probit => T::one(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Link::Logistic => "logistic",
            Link::Probit => "probit",
        }
    }
}

impl std::fmt::Display for Link {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Arm-wise means and common dispersion of the continuous covariates
/// `X = (X₁, X₂)`, where the first `p` coordinates are fitted and the last
/// `q` are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateModel<T> {
    nu_plus: Vec<T>,
    nu_minus: Vec<T>,
    omega: Matrix<T>,
    p: usize,
    q: usize,
    p_treat: T,
}

impl<T: Real> CovariateModel<T> {
    pub fn new(
        nu_plus: Vec<T>,
        nu_minus: Vec<T>,
        omega: Matrix<T>,
        p: usize,
        p_treat: T,
    ) -> Result<Self> {
        let d = omega.rows();
        if !omega.is_square() {
            return Err(Error::contract(format!(
                "omega must be square, got {}x{}",
                omega.rows(),
                omega.cols()
            )));
        }
        if p >= d {
            return Err(Error::contract(format!(
                "need at least one omitted covariate: p = {p} but dimension is {d}"
            )));
        }
        for (what, nu) in [("nu_plus", &nu_plus), ("nu_minus", &nu_minus)] {
            if nu.len() != d {
                return Err(Error::Dimension {
                    what,
                    expected: d,
                    got: nu.len(),
                });
            }
        }
        if !(p_treat > T::zero() && p_treat < T::one()) {
            return Err(Error::contract(format!("p_treat = {p_treat} outside (0, 1)")));
        }
        let scale = omega.as_slice().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = lit::<T>(1e-10) * scale.max(T::one());
        if omega.max_asymmetry() > tol {
            return Err(Error::contract("omega is not symmetric"));
        }
        check_psd(&omega, tol)?;
        let q = d - p;
        Ok(CovariateModel {
            nu_plus,
            nu_minus,
            omega,
            p,
            q,
            p_treat,
        })
    }

    /// Randomized trial: both arms share mean `nu` and allocation is 1:1.
    pub fn randomized(nu: Vec<T>, omega: Matrix<T>, p: usize) -> Result<Self> {
        Self::new(nu.clone(), nu, omega, p, lit(0.5))
    }

    /// Zero means, unit variances and common correlation `rho`.
    pub fn equicorrelated(p: usize, q: usize, rho: T) -> Result<Self> {
        let d = p + q;
        Self::randomized(vec![T::zero(); d], Matrix::equicorrelation(d, rho), p)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn p_treat(&self) -> T {
        self.p_treat
    }

    pub fn omega(&self) -> &Matrix<T> {
        &self.omega
    }

    pub fn nu_plus(&self) -> &[T] {
        &self.nu_plus
    }

    pub fn nu_minus(&self) -> &[T] {
        &self.nu_minus
    }

    /// Mean of `X` in arm `t ∈ {+1, −1}`.
    pub fn nu(&self, plus: bool) -> &[T] {
        if plus {
            &self.nu_plus
        } else {
            &self.nu_minus
        }
    }

    /// Marginal mean of `X` over both arms.
    pub fn marginal_mean(&self) -> Vec<T> {
        let pt = self.p_treat;
        self.nu_plus
            .iter()
            .zip(&self.nu_minus)
            .map(|(&a, &b)| pt * a + (T::one() - pt) * b)
            .collect()
    }

    pub fn is_randomized(&self) -> bool {
        self.nu_plus == self.nu_minus
    }

    pub fn fitted_indices(&self) -> Vec<usize> {
        (0..self.p).collect()
    }

    pub fn omitted_indices(&self) -> Vec<usize> {
        (self.p..self.dim()).collect()
    }

    /// Blocks `(Ω₁₁, Ω₁₂, Ω₂₁, Ω₂₂)`.
    pub fn blocks(&self) -> (Matrix<T>, Matrix<T>, Matrix<T>, Matrix<T>) {
        let f = self.fitted_indices();
        let o = self.omitted_indices();
        (
            self.omega.select(&f, &f),
            self.omega.select(&f, &o),
            self.omega.select(&o, &f),
            self.omega.select(&o, &o),
        )
    }

    /// Copy of the model with a different fitted/omitted split of the same
    /// coordinates.
    pub fn with_fitted(&self, p: usize) -> Result<Self> {
        Self::new(
            self.nu_plus.clone(),
            self.nu_minus.clone(),
            self.omega.clone(),
            p,
            self.p_treat,
        )
    }
}

fn check_psd<T: Real>(omega: &Matrix<T>, tol: T) -> Result<()> {
    // semidefinite LDLᵀ: a (near) zero pivot is admissible only when the
    // rest of its column vanishes too
    let n = omega.rows();
    let mut a = omega.clone();
    for j in 0..n {
        let d = a[(j, j)];
        if d < -tol {
            return Err(Error::contract("omega is not positive semi-definite"));
        }
        if d <= tol {
            if (j + 1..n).any(|i| a[(i, j)].abs() > tol.sqrt()) {
                return Err(Error::contract("omega is not positive semi-definite"));
            }
            continue;
        }
        for i in j + 1..n {
            let f = a[(i, j)] / d;
            for k in j + 1..n {
                a[(i, k)] = a[(i, k)] - f * a[(j, k)];
            }
        }
    }
    Ok(())
}

/// Quantities of the fitted/omitted split shared by the bias formulas.
#[derive(Debug, Clone)]
pub struct Partition<T> {
    /// `Ω₁₁⁻¹ Ω₁₂` (p × q): regression of `X₂` on `X₁`.
    pub regression: Matrix<T>,
    /// `Ω̃ = Ω₂₂ − Ω₂₁ Ω₁₁⁻¹ Ω₁₂` (q × q).
    pub conditional: Matrix<T>,
}

impl<T: Real> Partition<T> {
    pub fn new(model: &CovariateModel<T>) -> Result<Self> {
        let (o11, o12, o21, o22) = model.blocks();
        if model.p() == 0 {
            return Ok(Partition {
                regression: Matrix::zeros(0, model.q()),
                conditional: o22,
            });
        }
        let chol = Cholesky::new(&o11, "fitted block Omega11")?;
        let regression = chol.solve(&o12);
        let mut conditional = o22.sub(&o21.matmul(&regression)?);
        // symmetrize away rounding
        let q = conditional.rows();
        for i in 0..q {
            for j in 0..i {
                let m = (conditional[(i, j)] + conditional[(j, i)]) * lit(0.5);
                conditional[(i, j)] = m;
                conditional[(j, i)] = m;
            }
        }
        Ok(Partition {
            regression,
            conditional,
        })
    }

    /// `β₂ᵀ Ω̃ β₂`, floored at zero.
    pub fn omitted_variance(&self, beta2: &[T]) -> Result<T> {
        if beta2.len() != self.conditional.rows() {
            return Err(Error::Dimension {
                what: "beta2 length",
                expected: self.conditional.rows(),
                got: beta2.len(),
            });
        }
        Ok(self.conditional.quadratic_form(beta2)?.max(T::zero()))
    }

    /// `β₂ᵀ(ν₂ − Ω₂₁Ω₁₁⁻¹ν₁)` for a mean vector `nu` over all coordinates.
    pub fn residual_mean_shift(&self, beta2: &[T], nu: &[T]) -> Result<T> {
        let p = self.regression.rows();
        let (nu1, nu2) = nu.split_at(p);
        let projected = self.regression.transpose().matvec(nu1)?;
        Ok(beta2
            .iter()
            .zip(nu2.iter().zip(&projected))
            .fold(T::zero(), |s, (&b, (&n2, &pr))| s + b * (n2 - pr)))
    }

    /// `β₁ + Ω₁₁⁻¹Ω₁₂β₂`.
    pub fn absorbed_beta1(&self, beta1: &[T], beta2: &[T]) -> Result<Vec<T>> {
        let shift = self.regression.matvec(beta2)?;
        Ok(beta1.iter().zip(&shift).map(|(&a, &b)| a + b).collect())
    }
}

/// Schur complement `Ω̃ = Ω₂₂ − Ω₂₁ Ω₁₁⁻¹ Ω₁₂`, the dispersion of the omitted
/// covariates given the fitted ones (`Ω₂₂` itself when `p = 0`).
pub fn conditional_dispersion<T: Real>(model: &CovariateModel<T>) -> Result<Matrix<T>> {
    Ok(Partition::new(model)?.conditional)
}

/// `q̃ = √(1 + s·β₂ᵀΩ̃β₂)` with `s = c²` for the logistic link and `s = 1`
/// for probit.
pub fn attenuation_radical<T: Real>(
    model: &CovariateModel<T>,
    beta2: &[T],
    link: Link,
) -> Result<T> {
    let v = Partition::new(model)?.omitted_variance(beta2)?;
    Ok(radical_from_variance(v, link))
}

pub fn radical_from_variance<T: Real>(v: T, link: Link) -> T {
    (T::one() + link.radical_scale::<T>() * v).sqrt()
}

/// Non-treatment binary covariate `B ∈ {−1, +1}` of the extended model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct BinaryBlock<T> {
    /// Coefficient of `B`.
    pub gamma: T,
    /// `Pr(B = +1)`.
    pub theta: T,
    /// `E(X | B = +1)`.
    pub nu_b_plus: Vec<T>,
    /// `E(X | B = −1)`.
    pub nu_b_minus: Vec<T>,
}

/// Data-generating model
/// `Pr(Y=1 | T, X) = F(μ + αT + β₁ᵀX₁ + β₂ᵀX₂ [+ γB])`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel<T> {
    pub link: Link,
    pub mu: T,
    pub alpha: T,
    pub beta1: Vec<T>,
    pub beta2: Vec<T>,
    pub binary_block: Option<BinaryBlock<T>>,
}

impl<T: Real> TrueModel<T> {
    /// Checks the coefficient lengths against `cov`.
    pub fn validate(&self, cov: &CovariateModel<T>) -> Result<()> {
        if self.beta1.len() != cov.p() {
            return Err(Error::Dimension {
                what: "beta1 length",
                expected: cov.p(),
                got: self.beta1.len(),
            });
        }
        if self.beta2.len() != cov.q() {
            return Err(Error::Dimension {
                what: "beta2 length",
                expected: cov.q(),
                got: self.beta2.len(),
            });
        }
        if let Some(b) = &self.binary_block {
            if !(b.theta > T::zero() && b.theta < T::one()) {
                return Err(Error::contract(format!(
                    "binary_block.theta = {} outside (0, 1)",
                    b.theta
                )));
            }
            for (what, nu) in [("nu_b_plus", &b.nu_b_plus), ("nu_b_minus", &b.nu_b_minus)] {
                if nu.len() != cov.dim() {
                    return Err(Error::Dimension {
                        what,
                        expected: cov.dim(),
                        got: nu.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Full coefficient vector `β = (β₁, β₂)`.
    pub fn beta(&self) -> Vec<T> {
        self.beta1.iter().chain(&self.beta2).copied().collect()
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = link;
        self
    }
}

fn default_p_treat<T: Real>() -> T {
    lit(0.5)
}

/// JSON form of a `TrueModel` + `CovariateModel` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ModelSpec<T> {
    pub nu_plus: Vec<T>,
    pub nu_minus: Vec<T>,
    pub omega: Matrix<T>,
    pub p: usize,
    pub q: usize,
    pub link: Link,
    pub mu: T,
    pub alpha: T,
    pub beta1: Vec<T>,
    pub beta2: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_block: Option<BinaryBlock<T>>,
    #[serde(default = "default_p_treat")]
    pub p_treat: T,
}

impl<T: Real> ModelSpec<T> {
    pub fn from_parts(model: &TrueModel<T>, cov: &CovariateModel<T>) -> Self {
        ModelSpec {
            nu_plus: cov.nu_plus.clone(),
            nu_minus: cov.nu_minus.clone(),
            omega: cov.omega.clone(),
            p: cov.p,
            q: cov.q,
            link: model.link,
            mu: model.mu,
            alpha: model.alpha,
            beta1: model.beta1.clone(),
            beta2: model.beta2.clone(),
            binary_block: model.binary_block.clone(),
            p_treat: cov.p_treat,
        }
    }

    /// Validates and splits into the library types.
    pub fn resolve(&self) -> Result<(TrueModel<T>, CovariateModel<T>)> {
        if self.p + self.q != self.omega.rows() {
            return Err(Error::Schema(format!(
                "p + q = {} does not match omega dimension {}",
                self.p + self.q,
                self.omega.rows()
            )));
        }
        let cov = CovariateModel::new(
            self.nu_plus.clone(),
            self.nu_minus.clone(),
            self.omega.clone(),
            self.p,
            self.p_treat,
        )?;
        let model = TrueModel {
            link: self.link,
            mu: self.mu,
            alpha: self.alpha,
            beta1: self.beta1.clone(),
            beta2: self.beta2.clone(),
            binary_block: self.binary_block.clone(),
        };
        model.validate(&cov)?;
        Ok((model, cov))
    }
}

/// `β₂ᵀ Ω̃ β₂` for a model pair.
pub fn omitted_variance<T: Real>(model: &TrueModel<T>, cov: &CovariateModel<T>) -> Result<T> {
    model.validate(cov)?;
    Partition::new(cov)?.omitted_variance(&model.beta2)
}

/// `βᵀΩβ` over all covariates.
pub fn total_variance<T: Real>(model: &TrueModel<T>, cov: &CovariateModel<T>) -> Result<T> {
    let beta = model.beta();
    Ok(dot(&beta, &cov.omega().matvec(&beta)?).max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn no_fitted_covariates_returns_omega22() {
        let cov = CovariateModel::equicorrelated(0, 2, 0.5).unwrap();
        let t = conditional_dispersion(&cov).unwrap();
        assert_eq!(t.to_rows(), vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
    }

    #[test]
    fn one_fitted_one_omitted() {
        let cov = CovariateModel::equicorrelated(1, 1, 0.5).unwrap();
        let t = conditional_dispersion(&cov).unwrap();
        assert_abs_diff_eq!(t[(0, 0)], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn two_fitted_three_omitted() {
        let cov = CovariateModel::equicorrelated(2, 3, 0.5).unwrap();
        let t = conditional_dispersion(&cov).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 / 3.0 } else { 1.0 / 6.0 };
                assert_abs_diff_eq!(t[(i, j)], want, epsilon = 1e-14);
            }
        }
        let v = Partition::new(&cov).unwrap().omitted_variance(&[2.0; 3]).unwrap();
        assert_abs_diff_eq!(v, 12.0, epsilon = 1e-12);
    }

    #[test]
    fn radical_examples() {
        let cov = CovariateModel::equicorrelated(0, 2, 0.5).unwrap();
        assert_eq!(attenuation_radical(&cov, &[0.0, 0.0], Link::Logistic).unwrap(), 1.0);
        let lg = attenuation_radical(&cov, &[0.5, 0.5], Link::Logistic).unwrap();
        assert_abs_diff_eq!(lg, (1.0 + 0.345_842_973_499_179_6 * 0.75f64).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(lg, 1.1222, epsilon = 1e-4);
        let pr = attenuation_radical(&cov, &[0.5, 0.5], Link::Probit).unwrap();
        assert_abs_diff_eq!(pr, 1.75f64.sqrt(), epsilon = 1e-14);
        assert!(attenuation_radical(&cov, &[0.5], Link::Probit).is_err());
    }

    #[test]
    fn singular_fitted_block_is_named() {
        let omega = Matrix::from_rows(&[
            vec![1.0, 1.0, 0.2],
            vec![1.0, 1.0, 0.2],
            vec![0.2, 0.2, 1.0],
        ])
        .unwrap();
        let cov = CovariateModel::randomized(vec![0.0; 3], omega, 2).unwrap();
        let err = conditional_dispersion(&cov).unwrap_err();
        assert!(err.to_string().contains("Omega11"), "{err}");
    }

    #[test]
    fn rejects_bad_models() {
        assert!(CovariateModel::equicorrelated(2, 0, 0.5).is_err());
        let bad = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(CovariateModel::randomized(vec![0.0; 2], bad, 0).is_err());
        let asym = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]).unwrap();
        assert!(CovariateModel::randomized(vec![0.0; 2], asym, 0).is_err());
        let omega = Matrix::identity(2);
        assert!(CovariateModel::new(vec![0.0; 2], vec![0.0; 2], omega, 0, 1.0).is_err());
    }

    #[test]
    fn psd_but_singular_omega_accepted() {
        // X₂ is an exact copy of X₁: Ω̃ = 0
        let omega = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let cov = CovariateModel::randomized(vec![0.0; 2], omega, 1).unwrap();
        let v = Partition::new(&cov).unwrap().omitted_variance(&[3.0]).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            attenuation_radical(&cov, &[3.0], Link::Logistic).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn model_spec_json() {
        let json = r#"{
            "nu_plus": [0, 0], "nu_minus": [0, 0],
            "omega": [[1, 0.5], [0.5, 1]],
            "p": 0, "q": 2, "link": "logistic",
            "mu": 0, "alpha": 0.5, "beta1": [], "beta2": [0.5, 0.5]
        }"#;
        let spec: ModelSpec<f64> = serde_json::from_str(json).unwrap();
        let (model, cov) = spec.resolve().unwrap();
        assert_eq!(model.link, Link::Logistic);
        assert_eq!(cov.p_treat(), 0.5);
        assert!(model.binary_block.is_none());

        let wrong_q = json.replace("\"q\": 2", "\"q\": 3");
        let spec: ModelSpec<f64> = serde_json::from_str(&wrong_q).unwrap();
        assert!(matches!(spec.resolve(), Err(Error::Schema(_))));
        let typo = json.replace("\"mu\"", "\"mew\"");
        assert!(serde_json::from_str::<ModelSpec<f64>>(&typo).is_err());
    }
}

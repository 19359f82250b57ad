//! Binomial regression by iteratively reweighted least squares.
//!
//! Each iteration solves the weighted least-squares problem for the Newton
//! increment by Householder QR of the row-scaled design, so the cross-product
//! matrix is never formed. Steps are halved while the log-likelihood drops.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::covariate::Link;
use crate::error::{Error, Result};
use crate::linalg::{dot, qr_least_squares, Matrix};
use crate::scalar::{from_usize, lit, Real};
use crate::specfun::{log_norm_cdf, norm_cdf, norm_pdf};

/// Coefficient norm treated as divergence to infinity.
pub const SEPARATION_LIMIT: f64 = 1e4;
const MAX_HALVINGS: usize = 40;
/// Largest Newton increment, relative to the coefficient scale, accepted at convergence.
const STEP_TOL: f64 = 1e-5;

/// Binary outcomes with their design matrix (intercept column included).
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    y: Vec<u8>,
    design: Matrix<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(y: Vec<u8>, design: Matrix<T>) -> Result<Self> {
        if y.len() != design.rows() {
            return Err(Error::Dimension {
                what: "outcome length",
                expected: design.rows(),
                got: y.len(),
            });
        }
        if let Some(i) = y.iter().position(|&v| v > 1) {
            return Err(Error::contract(format!("outcome {} at row {i} is not 0/1", y[i])));
        }
        if design.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("design contains non-finite entries"));
        }
        Ok(Dataset { y, design })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.design.cols()
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.design
    }

    /// Proportion of rows with `y = 1`.
    pub fn event_rate(&self) -> T {
        let events = self.y.iter().filter(|&&v| v == 1).count();
        from_usize::<T>(events) / from_usize::<T>(self.n().max(1))
    }
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct FitResult<T> {
    pub coefficients: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the score divided by the number of rows used.
    pub max_score: T,
    pub log_likelihood: T,
}

#[derive(Debug, Clone)]
pub struct FitOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Starting coefficients; zero when absent.
    pub start: Option<Vec<T>>,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            tol: lit(1e-8),
            max_iter: 50,
            start: None,
        }
    }
}

/// Maximum-likelihood fit starting from zero.
pub fn fit<T: Real>(data: &Dataset<T>, link: Link, tol: T, max_iter: usize) -> Result<FitResult<T>> {
    let opts = FitOptions {
        tol,
        max_iter,
        start: None,
    };
    fit_with(data, link, &opts)
}

pub fn fit_with<T: Real>(data: &Dataset<T>, link: Link, opts: &FitOptions<T>) -> Result<FitResult<T>> {
    irls(data, link, opts, 0..0)
}

/// Fit that leaves out the rows in `skip`, used for delete-a-block jackknife
/// refits without copying the data.
pub fn fit_excluding<T: Real>(
    data: &Dataset<T>,
    link: Link,
    opts: &FitOptions<T>,
    skip: Range<usize>,
) -> Result<FitResult<T>> {
    if skip.start > skip.end || skip.end > data.n() {
        return Err(Error::contract(format!(
            "excluded range {skip:?} outside 0..{}",
            data.n()
        )));
    }
    irls(data, link, opts, skip)
}

fn rows(n: usize, skip: &Range<usize>) -> impl Iterator<Item = usize> {
    (0..skip.start.min(n)).chain(skip.end.min(n)..n)
}

/// Per-row log-likelihood, row scale `√W` and scaled working residual
/// `(y − F)/√(F·F̄)`. The score multiplier `(y − F)·f/(F·F̄)` is their
/// product. Both links keep exact weights deep in the tails.
#[inline]
fn row_terms<T: Real>(link: Link, eta: T, y: u8) -> (T, T, T) {
    let half = lit::<T>(0.5);
    match link {
        Link::Logistic => {
            // with s = e^{-|η|/2}: √(F·F̄) = s/(1 + s²) and F̄/F = e^{-η}
            let s = (-half * eta.abs()).exp();
            let e = s * s;
            let scale = s / (T::one() + e);
            let toward = (y == 1) == (eta >= T::zero());
            let ll = -e.ln_1p() - if toward { T::zero() } else { eta.abs() };
            let r = if toward { s } else { s.recip() };
            (ll, scale, if y == 1 { r } else { -r })
        }
        Link::Probit if eta.abs() < lit(30.0) => {
            let small = norm_cdf(-eta.abs());
            let large = T::one() - small;
            let dens = norm_pdf(eta);
            let scale = dens / (small * large).sqrt();
            let toward = (y == 1) == (eta >= T::zero());
            let (ll, r) = if toward {
                ((-small).ln_1p(), (small / large).sqrt())
            } else {
                (small.ln(), (large / small).sqrt())
            };
            (ll, scale, if y == 1 { r } else { -r })
        }
        Link::Probit => {
            let (ln_hi, ln_lo) = (log_norm_cdf(eta), log_norm_cdf(-eta));
            let ln_dens = -half * eta * eta - lit::<T>(0.918_938_533_204_672_8);
            let scale = (ln_dens - half * (ln_hi + ln_lo)).exp();
            if y == 1 {
                (ln_hi, scale, (half * (ln_lo - ln_hi)).exp())
            } else {
                (ln_lo, scale, -(half * (ln_hi - ln_lo)).exp())
            }
        }
    }
}

/// Weighted least-squares problem for the Newton increment at one
/// coefficient vector, with the log-likelihood there.
struct Linearization<T> {
    columns: Vec<Vec<T>>,
    rhs: Vec<T>,
    max_score: T,
    log_likelihood: T,
}

/// The log-likelihood is accumulated with Neumaier-compensated summation:
/// near the optimum the ascent of a Newton step is far below the rounding of
/// a plain sum over 10⁵ rows, which would stall the line search.
fn linearize<T: Real>(data: &Dataset<T>, link: Link, beta: &[T], skip: &Range<usize>) -> Linearization<T> {
    let k = data.k();
    let used = data.n() - (skip.end - skip.start);
    let mut columns: Vec<Vec<T>> = (0..k).map(|_| Vec::with_capacity(used)).collect();
    let mut rhs = Vec::with_capacity(used);
    let mut score = vec![T::zero(); k];
    let (mut sum, mut carry) = (T::zero(), T::zero());
    for i in rows(data.n(), skip) {
        let x = data.design.row(i);
        let (ll, scale, resid) = row_terms(link, dot(x, beta), data.y[i]);
        let g = scale * resid;
        for j in 0..k {
            columns[j].push(scale * x[j]);
            score[j] = score[j] + g * x[j];
        }
        rhs.push(resid);
        let t = sum + ll;
        carry = carry + if sum.abs() >= ll.abs() { (sum - t) + ll } else { (ll - t) + sum };
        sum = t;
    }
    let max_score = score.iter().fold(T::zero(), |m, s| m.max(s.abs())) / from_usize::<T>(used);
    Linearization {
        columns,
        rhs,
        max_score,
        log_likelihood: sum + carry,
    }
}

fn irls<T: Real>(data: &Dataset<T>, link: Link, opts: &FitOptions<T>, skip: Range<usize>) -> Result<FitResult<T>> {
    let k = data.k();
    let used = data.n() - (skip.end - skip.start);
    if used <= k {
        return Err(Error::contract(format!("{used} rows cannot identify {k} coefficients")));
    }
    let mut beta = match &opts.start {
        Some(s) if s.len() != k => {
            return Err(Error::Dimension {
                what: "starting coefficients",
                expected: k,
                got: s.len(),
            })
        }
        Some(s) => s.clone(),
        None => vec![T::zero(); k],
    };
    let mut lin = linearize(data, link, &beta, &skip);
    let mut iterations = 0;
    let converged = loop {
        let (max_score, ll) = (lin.max_score, lin.log_likelihood);
        let delta = qr_least_squares(std::mem::take(&mut lin.columns), std::mem::take(&mut lin.rhs))?;
        // under separation the score vanishes while the Newton step does not
        let reach = beta.iter().fold(T::one(), |m, b| m.max(b.abs()));
        let step_small = delta.iter().all(|d| d.abs() <= lit::<T>(STEP_TOL) * reach);
        if max_score < opts.tol && step_small {
            break true;
        }
        if iterations == opts.max_iter {
            break false;
        }
        iterations += 1;
        let slack = lit::<T>(1e-12) * (ll.abs() + T::one());
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<T> = beta.iter().zip(&delta).map(|(&b, &d)| b + step * d).collect();
            let cand_lin = linearize(data, link, &cand, &skip);
            if cand_lin.log_likelihood.is_finite() && cand_lin.log_likelihood >= ll - slack {
                accepted = Some((cand, cand_lin));
                break;
            }
            step = step * lit(0.5);
        }
        let Some((cand, cand_lin)) = accepted else {
            // no ascent left at working precision
            break max_score < opts.tol;
        };
        let norm = dot(&cand, &cand).sqrt();
        if norm > lit(SEPARATION_LIMIT) {
            return Err(Error::Separation {
                norm: norm.to_f64().unwrap_or(f64::INFINITY),
                limit: SEPARATION_LIMIT,
            });
        }
        beta = cand;
        lin = cand_lin;
    };
    Ok(FitResult {
        coefficients: beta,
        iterations,
        converged,
        max_score: lin.max_score,
        log_likelihood: lin.log_likelihood,
    })
}

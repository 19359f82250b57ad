//! Scalar special functions: logistic and Normal primitives, the logit/probit
//! matching constant and Owen's T function.
//!
//! Everything here is generic over [`Real`]; accuracy statements refer to `f64`.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Scale `c = 16·√3 / (15·π)` for which `expit(u) ≈ Φ(c·u)`.
pub fn probit_logit_constant<T: Real>() -> T {
    lit::<T>(16.0) * lit::<T>(3.0).sqrt() / (lit::<T>(15.0) * T::PI())
}

fn check_finite<T: Real>(func: &'static str, x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(func, format!("argument {x} is not finite")))
    }
}

/// Logistic function `exp(u) / (1 + exp(u))`.
pub fn expit<T: Real>(u: T) -> Result<T> {
    check_finite("expit", u)?;
    Ok(expit_unchecked(u))
}

/// [`expit`] without the finiteness check, for inner loops.
#[inline]
pub fn expit_unchecked<T: Real>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

/// `ln expit(u)`, accurate in both tails.
#[inline]
pub fn log_expit<T: Real>(u: T) -> T {
    if u >= T::zero() {
        -(-u).exp().ln_1p()
    } else {
        u - u.exp().ln_1p()
    }
}

/// Inverse of [`expit`].
pub fn logit<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain("logit", format!("probability {p} outside (0, 1)")));
    }
    Ok((p / (T::one() - p)).ln())
}

/// Standard Normal density.
#[inline]
pub fn norm_pdf<T: Real>(u: T) -> T {
    let inv_sqrt_2pi = T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * lit(0.5);
    inv_sqrt_2pi * (-(u * u) * lit(0.5)).exp()
}

/// Below this argument `erf` is summed as a positive series; above it the
/// scaled complement comes from a continued fraction.
const ERF_SWITCH: f64 = 2.5;

/// `erf(x)` for `0 <= x < ERF_SWITCH` via
/// `erf(x) = 2x/√π · e^{-x²} · Σ (2x²)^n / (1·3·…·(2n+1))`.
fn erf_series<T: Real>(x: T) -> T {
    let two_x2 = lit::<T>(2.0) * x * x;
    let mut term = T::one();
    let mut sum = T::one();
    let mut n = 0usize;
    loop {
        n += 1;
        term = term * two_x2 / lit::<T>((2 * n + 1) as f64);
        sum = sum + term;
        if term <= sum * T::epsilon() || n > 500 {
            break;
        }
    }
    T::FRAC_2_SQRT_PI() * x * (-(x * x)).exp() * sum
}

/// `e^{x²}·erfc(x)` for `x >= ERF_SWITCH`, by modified Lentz evaluation of
/// `erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfcx_cf<T: Real>(x: T) -> T {
    let tiny = lit::<T>(1e-300).max(T::min_positive_value());
    let mut f = x;
    let mut c = x;
    let mut d = T::zero();
    let half = lit::<T>(0.5);
    for k in 1..2000usize {
        let a = half * lit::<T>(k as f64);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
    }
    T::FRAC_2_SQRT_PI() * half / f
}

/// Error function.
pub fn erf<T: Real>(x: T) -> T {
    let ax = x.abs();
    let v = if ax < lit(ERF_SWITCH) {
        erf_series(ax)
    } else {
        T::one() - erfcx_cf(ax) * (-(ax * ax)).exp()
    };
    if x < T::zero() {
        -v
    } else {
        v
    }
}

/// Complementary error function, with full relative accuracy for large `x`.
pub fn erfc<T: Real>(x: T) -> T {
    if x < T::zero() {
        lit::<T>(2.0) - erfc(-x)
    } else if x < lit(ERF_SWITCH) {
        T::one() - erf_series(x)
    } else {
        erfcx_cf(x) * (-(x * x)).exp()
    }
}

/// Scaled complementary error function `e^{x²}·erfc(x)` for `x >= 0`.
pub fn erfcx<T: Real>(x: T) -> T {
    debug_assert!(x >= T::zero());
    if x < lit(ERF_SWITCH) {
        (T::one() - erf_series(x)) * (x * x).exp()
    } else {
        erfcx_cf(x)
    }
}

/// Standard Normal distribution function Φ.
#[inline]
pub fn norm_cdf<T: Real>(u: T) -> T {
    if u > T::zero() {
        T::one() - lit::<T>(0.5) * erfc(u * T::FRAC_1_SQRT_2())
    } else {
        lit::<T>(0.5) * erfc(-u * T::FRAC_1_SQRT_2())
    }
}

/// `ln Φ(u)`, finite for any finite `u`.
pub fn log_norm_cdf<T: Real>(u: T) -> T {
    if u >= lit(-5.0) {
        norm_cdf(u).ln()
    } else {
        let x = -u * T::FRAC_1_SQRT_2();
        (lit::<T>(0.5) * erfcx(x)).ln() - x * x
    }
}

/// Hazard `φ(x) / Φ(-x)`, computed without underflow for large `x`.
pub fn norm_hazard<T: Real>(x: T) -> T {
    if x <= T::zero() {
        norm_pdf(x) / norm_cdf(-x)
    } else {
        // φ(x)/Φ(-x) = √(2/π) / erfcx(x/√2)
        T::FRAC_2_SQRT_PI() * T::FRAC_1_SQRT_2() / erfcx(x * T::FRAC_1_SQRT_2())
    }
}

/// Probit working weight `φ(η) / (Φ(η)·Φ(-η))`, finite for all finite `η`.
pub fn probit_weight<T: Real>(eta: T) -> T {
    let x = eta.abs();
    norm_hazard(x) / norm_cdf(x)
}

/// Standard Normal quantile function.
pub fn norm_quantile<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain(
            "norm_quantile",
            format!("probability {p} outside (0, 1)"),
        ));
    }
    let pf = p.to_f64().unwrap();
    let mut x = lit::<T>(quantile_initial(pf));
    // Halley refinement against the accurate distribution function.
    let sqrt_2pi = lit::<T>((2.0 * std::f64::consts::PI).sqrt());
    for _ in 0..3 {
        let e = if x > T::zero() {
            (T::one() - p) - norm_cdf(-x)
        } else {
            norm_cdf(x) - p
        };
        let u = e * sqrt_2pi * (x * x * lit(0.5)).exp();
        let step = u / (T::one() + x * u * lit(0.5));
        x = x - step;
        if step.abs() <= T::epsilon() * x.abs().max(T::one()) {
            break;
        }
    }
    Ok(x)
}

/// Rational starting point for the quantile (about 1e-9 relative).
fn quantile_initial(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

// Gauss-Kronrod 15/7 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (integral, error estimate).
fn gk15<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T) -> (T, T) {
    let centre = (lo + hi) * lit(0.5);
    let half = (hi - lo) * lit(0.5);
    let fc = f(centre);
    let mut kronrod = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half * lit(XGK[j]);
        let pair = f(centre - dx) + f(centre + dx);
        kronrod = kronrod + pair * lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * lit(WG[j / 2]);
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[lo, hi]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_adaptive<T: Real, F: Fn(T) -> T>(
    f: F,
    lo: T,
    hi: T,
    abs_tol: T,
    rel_tol: T,
) -> T {
    const MAX_PANELS: usize = 2000;
    let (i0, e0) = gk15(&f, lo, hi);
    let mut panels = vec![(lo, hi, i0, e0)];
    loop {
        let total: T = panels.iter().map(|p| p.2).sum();
        let err: T = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || panels.len() >= MAX_PANELS {
            return total;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::zero()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (a, b, _, _) = panels.swap_remove(worst);
        let mid = (a + b) * lit(0.5);
        if mid <= a || mid >= b {
            return total;
        }
        let (il, el) = gk15(&f, a, mid);
        let (ir, er) = gk15(&f, mid, b);
        panels.push((a, mid, il, el));
        panels.push((mid, b, ir, er));
    }
}

/// `∫₀ᵃ exp(-h²x²/2) / (1+x²) dx`, i.e. `2π·e^{h²/2}·T(h, a)`.
///
/// Factoring out `e^{-h²/2}` keeps ratios of Owen T values accurate when
/// both are far below the absolute tolerance.
pub(crate) fn owen_t_scaled<T: Real>(h: T, a: T) -> T {
    if a == T::zero() {
        return T::zero();
    }
    let half_h2 = h * h * lit(0.5);
    let g = |x: T| (-half_h2 * x * x).exp() / (T::one() + x * x);
    let tol = T::epsilon() * lit(64.0);
    let v = integrate_adaptive(g, T::zero(), a.abs(), T::min_positive_value(), tol);
    if a < T::zero() {
        -v
    } else {
        v
    }
}

/// Owen's T function
/// `T(h, a) = (1/2π) ∫₀ᵃ exp(-½h²(1+x²)) / (1+x²) dx`.
pub fn owen_t<T: Real>(h: T, a: T) -> Result<T> {
    check_finite("owen_t", h)?;
    check_finite("owen_t", a)?;
    let scale = (-(h * h) * lit(0.5)).exp() / (lit::<T>(2.0) * T::PI());
    Ok(scale * owen_t_scaled(h, a))
}

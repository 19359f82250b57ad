//! Scenario description and seeded simulation of `(T, B, X, Y)`.
//!
//! Rows are generated in fixed-size chunks, each from its own ChaCha8
//! stream of the scenario seed, so results do not depend on how many
//! worker threads run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::covariate::{CovariateModel, Link, ModelSpec, TrueModel};
use crate::error::{Error, Result};
use crate::linalg::{dot, psd_factor, Matrix};
use crate::specfun::{expit_unchecked, norm_cdf};

/// Latent log-scale variance `ln((1 + √5)/2)`: gives `exp(σW)` unit variance.
pub const LOGNORMAL_SIGMA2: f64 = 0.481_211_825_059_603_5;
pub const DEFAULT_N: usize = 200_000;
pub const DEFAULT_SEED: u64 = 1;
pub(crate) const CHUNK_ROWS: usize = 8192;

/// Distribution family of the continuous covariates. Every law is scaled to
/// the mean vector and dispersion of the covariate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateLaw {
    Normal,
    /// Multivariate t with one shared χ² per row.
    StudentT { df: f64 },
    /// Coordinates flagged in `mask` are centred exponentials of Gaussians.
    Lognormal { mask: Vec<bool> },
}

impl CovariateLaw {
    pub fn is_normal(&self) -> bool {
        match self {
            CovariateLaw::Normal => true,
            CovariateLaw::Lognormal { mask } => mask.iter().all(|m| !m),
            CovariateLaw::StudentT { .. } => false,
        }
    }

    /// Short label such as `normal`, `t4` or `lognormal_10`.
    pub fn label(&self) -> String {
        match self {
            CovariateLaw::Normal => "normal".into(),
            CovariateLaw::StudentT { df } => format!("t{df}"),
            CovariateLaw::Lognormal { mask } => {
                let bits: String = mask.iter().map(|&m| if m { '1' } else { '0' }).collect();
                format!("lognormal_{bits}")
            }
        }
    }
}

/// One simulation or quadrature experiment.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub true_model: TrueModel<f64>,
    pub cov: CovariateModel<f64>,
    pub covariate_law: CovariateLaw,
    pub n: usize,
    pub seed: u64,
    /// Link of the reduced model that is fitted.
    pub fitted_link: Link,
}

const EXTENSION_KEYS: [&str; 4] = ["covariate_law", "n", "seed", "fitted_link"];

impl ScenarioSpec {
    pub fn new(
        true_model: TrueModel<f64>,
        cov: CovariateModel<f64>,
        covariate_law: CovariateLaw,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = ScenarioSpec {
            fitted_link: true_model.link,
            true_model,
            cov,
            covariate_law,
            n,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.true_model.validate(&self.cov)?;
        match &self.covariate_law {
            CovariateLaw::Normal => {}
            CovariateLaw::StudentT { df } => {
                if !(*df > 2.0) || !df.is_finite() {
                    return Err(Error::contract(format!(
                        "student_t needs finite df > 2 for unit variance, got {df}"
                    )));
                }
            }
            CovariateLaw::Lognormal { mask } => {
                if mask.len() != self.cov.dim() {
                    return Err(Error::Dimension {
                        what: "lognormal mask length",
                        expected: self.cov.dim(),
                        got: mask.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Flat JSON object: the model schema plus the four extension keys.
    pub fn to_json_value(&self) -> Value {
        let mut obj = match serde_json::to_value(ModelSpec::from_parts(&self.true_model, &self.cov)) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        obj.insert("covariate_law".into(), serde_json::to_value(&self.covariate_law).unwrap_or(Value::Null));
        obj.insert("n".into(), Value::from(self.n));
        obj.insert("seed".into(), Value::from(self.seed));
        obj.insert("fitted_link".into(), Value::from(self.fitted_link.as_str()));
        Value::Object(obj)
    }

    /// Parses the flat JSON form. Missing extension keys default to a
    /// Normal law, `n = 200000`, seed 1 and the generating link.
    pub fn from_json_value(value: Value) -> Result<Self> {
        let Value::Object(mut obj) = value else {
            return Err(Error::Schema("scenario must be a JSON object".into()));
        };
        let mut ext = Map::new();
        for key in EXTENSION_KEYS {
            if let Some(v) = obj.remove(key) {
                ext.insert(key.into(), v);
            }
        }
        let model: ModelSpec<f64> =
            serde_json::from_value(Value::Object(obj)).map_err(|e| Error::Schema(e.to_string()))?;
        let (true_model, cov) = model.resolve()?;
        let field = |key: &str| ext.get(key).cloned();
        let schema = |key: &str, e: serde_json::Error| Error::Schema(format!("{key}: {e}"));
        let covariate_law = match field("covariate_law") {
            Some(v) => serde_json::from_value(v).map_err(|e| schema("covariate_law", e))?,
            None => CovariateLaw::Normal,
        };
        let n = match field("n") {
            Some(v) => serde_json::from_value(v).map_err(|e| schema("n", e))?,
            None => DEFAULT_N,
        };
        let seed = match field("seed") {
            Some(v) => serde_json::from_value(v).map_err(|e| schema("seed", e))?,
            None => DEFAULT_SEED,
        };
        let fitted_link = match field("fitted_link") {
            Some(v) => serde_json::from_value(v).map_err(|e| schema("fitted_link", e))?,
            None => true_model.link,
        };
        let spec = ScenarioSpec {
            true_model,
            cov,
            covariate_law,
            n,
            seed,
            fitted_link,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_json_value(value)
    }
}

impl Serialize for ScenarioSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScenarioSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        ScenarioSpec::from_json_value(value).map_err(serde::de::Error::custom)
    }
}

/// Independent seed for cell `index` of a sweep started from `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over a Weyl step
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lognormal_mean_sd() -> (f64, f64) {
    let s2 = LOGNORMAL_SIGMA2;
    let mean = (0.5 * s2).exp();
    let sd = ((s2.exp() - 1.0) * s2.exp()).sqrt();
    (mean, sd)
}

/// Correlation of the observed pair when the latent Gaussians have
/// correlation `r`; `a`, `b` flag log-Normal coordinates.
pub fn delivered_correlation(r: f64, a: bool, b: bool) -> f64 {
    let s2 = LOGNORMAL_SIGMA2;
    let (_, sd) = lognormal_mean_sd();
    match (a, b) {
        (false, false) => r,
        (true, true) => ((r * s2).exp() - 1.0) / (s2.exp() - 1.0),
        _ => r * s2.sqrt() * (0.5 * s2).exp() / sd,
    }
}

/// Latent Gaussian correlation delivering observed correlation `rho`.
pub fn latent_correlation(rho: f64, a: bool, b: bool) -> Result<f64> {
    let s2 = LOGNORMAL_SIGMA2;
    let (_, sd) = lognormal_mean_sd();
    let r = match (a, b) {
        (false, false) => rho,
        (true, true) => {
            let arg = 1.0 + rho * (s2.exp() - 1.0);
            if !(arg > 0.0) {
                return Err(Error::contract(format!(
                    "correlation {rho} is below the floor attainable by two log-Normal covariates"
                )));
            }
            arg.ln() / s2
        }
        _ => rho * sd / (s2.sqrt() * (0.5 * s2).exp()),
    };
    if !(r.abs() <= 1.0) {
        return Err(Error::contract(format!(
            "correlation {rho} is not attainable between a log-Normal and a Normal covariate"
        )));
    }
    Ok(r)
}

/// Precomputed transform from standard Normal draws to covariate noise.
#[derive(Debug, Clone)]
pub struct CovariateSampler {
    scale: Vec<f64>,
    factor: Matrix<f64>,
    lognormal: Vec<bool>,
    chi2: Option<(ChiSquared<f64>, f64)>,
}

impl CovariateSampler {
    pub fn new(law: &CovariateLaw, omega: &Matrix<f64>) -> Result<Self> {
        let d = omega.rows();
        let lognormal = match law {
            CovariateLaw::Lognormal { mask } if mask.len() == d => mask.clone(),
            CovariateLaw::Lognormal { mask } => {
                return Err(Error::Dimension {
                    what: "lognormal mask length",
                    expected: d,
                    got: mask.len(),
                })
            }
            _ => vec![false; d],
        };
        let chi2 = match law {
            CovariateLaw::StudentT { df } if *df > 2.0 => Some((
                ChiSquared::new(*df).map_err(|e| Error::contract(format!("student_t df: {e}")))?,
                df - 2.0,
            )),
            CovariateLaw::StudentT { df } => {
                return Err(Error::contract(format!("student_t needs df > 2, got {df}")))
            }
            _ => None,
        };
        let scale: Vec<f64> = (0..d).map(|i| omega[(i, i)].max(0.0).sqrt()).collect();
        let mut latent = Matrix::identity(d);
        for i in 0..d {
            for j in 0..i {
                if scale[i] > 0.0 && scale[j] > 0.0 {
                    let rho = (omega[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0);
                    let r = latent_correlation(rho, lognormal[i], lognormal[j])?;
                    latent[(i, j)] = r;
                    latent[(j, i)] = r;
                }
            }
        }
        let factor = psd_factor(&latent, "latent covariate correlation").map_err(|_| {
            Error::contract("target dispersion is not attainable under the requested covariate law")
        })?;
        Ok(CovariateSampler {
            scale,
            factor,
            lognormal,
            chi2,
        })
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// Writes one zero-mean draw into `out`; `z` is scratch of the same length.
    pub fn draw<R: Rng>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mix = match &self.chi2 {
            Some((dist, num)) => (num / dist.sample(rng)).sqrt(),
            None => 1.0,
        };
        let (ln_mean, ln_sd) = lognormal_mean_sd();
        let sigma = LOGNORMAL_SIGMA2.sqrt();
        for i in 0..self.dim() {
            let g = dot(&self.factor.row(i)[..=i], &z[..=i]);
            out[i] = if self.lognormal[i] {
                self.scale[i] * ((sigma * g).exp() - ln_mean) / ln_sd
            } else {
                self.scale[i] * g * mix
            };
        }
    }
}

/// Simulated trial columns, rows in generation order.
#[derive(Debug, Clone, Default)]
pub(crate) struct Draws {
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    /// Row-major `n × (p+q)`.
    pub x: Vec<f64>,
    pub y: Vec<u8>,
}

impl Draws {
    fn append(&mut self, mut other: Draws) {
        self.t.append(&mut other.t);
        self.b.append(&mut other.b);
        self.x.append(&mut other.x);
        self.y.append(&mut other.y);
    }
}

fn simulate_chunk(
    spec: &ScenarioSpec,
    sampler: &CovariateSampler,
    chunk: usize,
    rows: usize,
    with_outcome: bool,
) -> Draws {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(chunk as u64);
    let d = sampler.dim();
    let model = &spec.true_model;
    let beta = model.beta();
    let block = model.binary_block.as_ref();
    let mut out = Draws {
        t: Vec::with_capacity(rows),
        b: Vec::with_capacity(if block.is_some() { rows } else { 0 }),
        x: Vec::with_capacity(rows * d),
        y: Vec::with_capacity(if with_outcome { rows } else { 0 }),
    };
    let mut z = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let p_treat = spec.cov.p_treat();
    for _ in 0..rows {
        let treated = rng.random_bool(p_treat);
        let t = if treated { 1.0 } else { -1.0 };
        let (b, mean) = match block {
            Some(bb) => {
                if rng.random_bool(bb.theta) {
                    (1.0, bb.nu_b_plus.as_slice())
                } else {
                    (-1.0, bb.nu_b_minus.as_slice())
                }
            }
            None => (0.0, spec.cov.nu(treated)),
        };
        sampler.draw(&mut rng, &mut z, &mut noise);
        for (v, m) in noise.iter_mut().zip(mean) {
            *v += m;
        }
        if with_outcome {
            let gamma = block.map_or(0.0, |bb| bb.gamma);
            let eta = model.mu + model.alpha * t + gamma * b + dot(&beta, &noise);
            let prob = match model.link {
                Link::Logistic => expit_unchecked(eta),
                Link::Probit => norm_cdf(eta),
            };
            out.y.push(u8::from(rng.random::<f64>() < prob));
        }
        out.t.push(t);
        if block.is_some() {
            out.b.push(b);
        }
        out.x.extend_from_slice(&noise);
    }
    out
}

pub(crate) fn simulate(spec: &ScenarioSpec, n: usize, with_outcome: bool) -> Result<Draws> {
    spec.validate()?;
    let sampler = CovariateSampler::new(&spec.covariate_law, spec.cov.omega())?;
    let chunks = n.div_ceil(CHUNK_ROWS);
    let parts: Vec<Draws> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = CHUNK_ROWS.min(n - c * CHUNK_ROWS);
            simulate_chunk(spec, &sampler, c, rows, with_outcome)
        })
        .collect();
    let mut all = Draws::default();
    for part in parts {
        all.append(part);
    }
    Ok(all)
}

/// `n × (p+q)` covariate draws (arm means included) under the scenario's
/// law and seed.
pub fn sample_covariates(spec: &ScenarioSpec, n: usize) -> Result<Matrix<f64>> {
    let draws = simulate(spec, n, false)?;
    Matrix::from_row_major(n, spec.cov.dim(), draws.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(law: CovariateLaw, seed: u64) -> ScenarioSpec {
        let model = TrueModel {
            link: Link::Logistic,
            mu: 0.0,
            alpha: 0.5,
            beta1: vec![0.5],
            beta2: vec![0.5],
            binary_block: None,
        };
        let cov = CovariateModel::equicorrelated(1, 1, 0.5).unwrap();
        ScenarioSpec::new(model, cov, law, 10_000, seed).unwrap()
    }

    fn column_stats(x: &Matrix<f64>, j: usize) -> (f64, f64, f64, f64) {
        let n = x.rows() as f64;
        let mean = (0..x.rows()).map(|i| x[(i, j)]).sum::<f64>() / n;
        let m = |k: i32| (0..x.rows()).map(|i| (x[(i, j)] - mean).powi(k)).sum::<f64>() / n;
        let var = m(2);
        (mean, var, m(3) / var.powf(1.5), m(4) / (var * var) - 3.0)
    }

    fn correlation(x: &Matrix<f64>) -> f64 {
        let n = x.rows() as f64;
        let (m0, v0, ..) = column_stats(x, 0);
        let (m1, v1, ..) = column_stats(x, 1);
        let c = (0..x.rows()).map(|i| (x[(i, 0)] - m0) * (x[(i, 1)] - m1)).sum::<f64>() / n;
        c / (v0 * v1).sqrt()
    }

    #[test]
    fn normal_moments() {
        let n = 1_000_000;
        let x = sample_covariates(&spec(CovariateLaw::Normal, 3), n).unwrap();
        let (mean, var, ..) = column_stats(&x, 0);
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.01);
        assert!((correlation(&x) - 0.5).abs() < 0.005);
    }

    #[test]
    fn lognormal_moments() {
        let n = 1_000_000;
        let law = CovariateLaw::Lognormal { mask: vec![true, false] };
        let x = sample_covariates(&spec(law, 4), n).unwrap();
        let (mean, var, skew, _) = column_stats(&x, 0);
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
        assert!((skew - 2.84).abs() < 0.05, "skewness {skew}");
        assert!((correlation(&x) - 0.5).abs() < 0.01);
        let law = CovariateLaw::Lognormal { mask: vec![true, true] };
        let x = sample_covariates(&spec(law, 5), n).unwrap();
        assert!((correlation(&x) - 0.5).abs() < 0.01);
    }

    #[test]
    fn student_t_moments() {
        let n = 1_000_000;
        let x = sample_covariates(&spec(CovariateLaw::StudentT { df: 4.0 }, 6), n).unwrap();
        let (_, var, _, kurt) = column_stats(&x, 1);
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
        assert!(kurt > 3.0, "excess kurtosis {kurt}");
        assert!((correlation(&x) - 0.5).abs() < 0.01);
    }

    #[test]
    fn lognormal_skewness_closed_form() {
        let e = LOGNORMAL_SIGMA2.exp();
        assert_abs_diff_eq!((e + 2.0) * (e - 1.0).sqrt(), 2.84, epsilon = 0.005);
        assert_abs_diff_eq!((e - 1.0) * e, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn latent_correlation_inverts() {
        for (a, b) in [(false, false), (true, false), (false, true), (true, true)] {
            for rho in [-0.3, 0.0, 0.5, 0.8] {
                let r = latent_correlation(rho, a, b).unwrap();
                assert_abs_diff_eq!(delivered_correlation(r, a, b), rho, epsilon = 1e-14);
            }
        }
        assert_abs_diff_eq!(latent_correlation(0.5, true, false).unwrap(), 0.5666, epsilon = 1e-4);
        assert_abs_diff_eq!(latent_correlation(0.5, true, true).unwrap(), 0.5596, epsilon = 1e-4);
        assert!(latent_correlation(0.95, true, false).is_err());
        assert!(latent_correlation(-0.9, true, true).is_err());
    }

    #[test]
    fn invalid_laws_rejected() {
        let s = spec(CovariateLaw::Normal, 1);
        let bad_t = ScenarioSpec {
            covariate_law: CovariateLaw::StudentT { df: 2.0 },
            ..s.clone()
        };
        assert!(bad_t.validate().is_err());
        let bad_mask = ScenarioSpec {
            covariate_law: CovariateLaw::Lognormal { mask: vec![true] },
            ..s
        };
        assert!(bad_mask.validate().is_err());
    }

    #[test]
    fn draws_repeat_exactly() {
        let s = spec(CovariateLaw::StudentT { df: 4.0 }, 9);
        let a = simulate(&s, 20_000, true).unwrap();
        let b = simulate(&s, 20_000, true).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let c = simulate(&ScenarioSpec { seed: 10, ..s }, 20_000, true).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let s = spec(CovariateLaw::Lognormal { mask: vec![true, false] }, 17);
        let text = serde_json::to_string(&s).unwrap();
        let back = ScenarioSpec::from_json(&text).unwrap();
        assert_eq!(back.covariate_law, s.covariate_law);
        assert_eq!((back.n, back.seed), (10_000, 17));
        let minimal = r#"{"nu_plus":[0,0],"nu_minus":[0,0],"omega":[[1,0.5],[0.5,1]],
            "p":0,"q":2,"link":"probit","mu":0,"alpha":0.5,"beta1":[],"beta2":[0.5,0.5]}"#;
        let m = ScenarioSpec::from_json(minimal).unwrap();
        assert_eq!(m.covariate_law, CovariateLaw::Normal);
        assert_eq!((m.n, m.seed, m.fitted_link), (DEFAULT_N, DEFAULT_SEED, Link::Probit));
        let typo = minimal.replace("\"mu\"", "\"mew\"");
        assert!(matches!(ScenarioSpec::from_json(&typo), Err(Error::Schema(_))));
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(1, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(1, 5), derive_seed(1, 5));
    }
}

//! Scenario grids for the three simulation tables and the correction-factor
//! curves, with every cell computed by one library operation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{
    figure1_curve, gail_least_false_alpha, neuhaus_least_false_alpha, probit_least_false,
    probit_neuhaus_hprime, skew_normal_least_false, Method,
};
use crate::covariate::{CovariateModel, Link, TrueModel};
use crate::error::{Error, Result};
use crate::oracle::{
    derive_seed, monte_carlo_least_false, quadrature_least_false, CovariateLaw, ScenarioSpec,
    DEFAULT_NODES, MIN_MC_N,
};

/// One column of a simulation table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableScenario {
    pub table: u8,
    /// 1-based parameter block within the table.
    pub block: usize,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub p: usize,
    pub q: usize,
    pub link: Link,
    pub law: CovariateLaw,
}

const CORRELATION: f64 = 0.5;

impl TableScenario {
    /// Unit variances, common correlation ½, zero means, all `β_k` equal.
    pub fn model(&self) -> Result<(TrueModel<f64>, CovariateModel<f64>)> {
        let cov = CovariateModel::equicorrelated(self.p, self.q, CORRELATION)?;
        let model = TrueModel {
            link: self.link,
            mu: self.mu,
            alpha: self.alpha,
            beta1: vec![self.beta; self.p],
            beta2: vec![self.beta; self.q],
            binary_block: None,
        };
        Ok((model, cov))
    }

    pub fn spec(&self, n: usize, seed: u64) -> Result<ScenarioSpec> {
        let (model, cov) = self.model()?;
        ScenarioSpec::new(model, cov, self.law.clone(), n, seed)
    }
}

const ALPHA_BETA: [(f64, f64); 4] = [(0.5, 0.5), (1.5, 0.5), (0.5, 2.0), (1.5, 2.0)];

/// Scenario columns of table 1, 2 or 3, in output order.
///
/// Table 1 carries a `p = 0, q = 5` column next to `p = 2, q = 3` in every
/// block: both designs are reported for the third column.
pub fn table_scenarios(which: u8) -> Result<Vec<TableScenario>> {
    let mut out = Vec::new();
    match which {
        1 => {
            for (b, &(alpha, beta)) in ALPHA_BETA.iter().enumerate() {
                for (p, q) in [(0, 2), (1, 1), (2, 3), (0, 5)] {
                    out.push(TableScenario {
                        table: 1,
                        block: b + 1,
                        alpha,
                        beta,
                        mu: 0.0,
                        p,
                        q,
                        link: Link::Logistic,
                        law: CovariateLaw::Normal,
                    });
                }
            }
        }
        2 => {
            for (b, (p, q, beta)) in [(0, 2, 0.5), (0, 2, 2.0), (2, 3, 0.5)].into_iter().enumerate() {
                for link in [Link::Logistic, Link::Probit] {
                    for mu in [0.0, 2.0, 4.0] {
                        out.push(TableScenario {
                            table: 2,
                            block: b + 1,
                            alpha: 0.5,
                            beta,
                            mu,
                            p,
                            q,
                            link,
                            law: CovariateLaw::Normal,
                        });
                    }
                }
            }
        }
        3 => {
            let laws = [
                CovariateLaw::StudentT { df: 4.0 },
                CovariateLaw::Lognormal { mask: vec![true, false] },
                CovariateLaw::Lognormal { mask: vec![false, true] },
                CovariateLaw::Lognormal { mask: vec![true, true] },
            ];
            for law in laws {
                for (b, &(alpha, beta)) in ALPHA_BETA.iter().enumerate() {
                    out.push(TableScenario {
                        table: 3,
                        block: b + 1,
                        alpha,
                        beta,
                        mu: 0.0,
                        p: 1,
                        q: 1,
                        link: Link::Logistic,
                        law: law.clone(),
                    });
                }
            }
        }
        _ => return Err(Error::contract(format!("no table {which}; expected 1, 2 or 3"))),
    }
    Ok(out)
}

/// Closed-form `α*` values that apply to a scenario.
///
/// Probit scenarios report the exact value under `probit_exact` and the
/// `H'(0)` factor times `α` under `neuhaus`.
pub fn closed_form_cells(s: &TableScenario) -> Result<Vec<(Method, f64)>> {
    let (model, cov) = s.model()?;
    let mut out = Vec::new();
    match s.link {
        Link::Logistic => {
            out.push((Method::SkewNormal, skew_normal_least_false(&model, &cov)?.alpha_star));
            if s.p == 0 {
                out.push((Method::Gail, gail_least_false_alpha(&model, &cov)?.alpha_star));
            }
            out.push((Method::Neuhaus, neuhaus_least_false_alpha(&model, &cov)?.alpha_star));
        }
        Link::Probit => {
            out.push((Method::ProbitExact, probit_least_false(&model, &cov)?.alpha_star));
            if s.p == 0 {
                out.push((Method::Gail, gail_least_false_alpha(&model, &cov)?.alpha_star));
            }
            out.push((Method::Neuhaus, s.alpha * probit_neuhaus_hprime(&model, &cov)?));
        }
    }
    Ok(out)
}

/// One cell of the long-format table output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub table: u8,
    pub block: usize,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub p: usize,
    pub q: usize,
    pub link: Link,
    pub law: String,
    pub method: Method,
    pub value: f64,
    pub mc_se: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TableOptions {
    pub n: usize,
    pub seed: u64,
    pub nodes: usize,
    pub monte_carlo: bool,
    pub quadrature: bool,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            n: crate::oracle::DEFAULT_N,
            seed: crate::oracle::DEFAULT_SEED,
            nodes: DEFAULT_NODES,
            monte_carlo: true,
            quadrature: true,
        }
    }
}

fn row(s: &TableScenario, method: Method, value: f64, mc_se: Option<f64>) -> TableRow {
    TableRow {
        table: s.table,
        block: s.block,
        alpha: s.alpha,
        beta: s.beta,
        mu: s.mu,
        p: s.p,
        q: s.q,
        link: s.link,
        law: s.law.label(),
        method,
        value,
        mc_se,
    }
}

fn scenario_rows(s: &TableScenario, index: usize, opts: &TableOptions) -> Result<Vec<TableRow>> {
    let mut out = Vec::new();
    if opts.monte_carlo {
        let spec = s.spec(opts.n, derive_seed(opts.seed, index as u64))?;
        let r = monte_carlo_least_false(&spec)?;
        out.push(row(s, Method::MonteCarloOracle, r.least_false.alpha_star, r.alpha_std_error()));
    }
    if opts.quadrature && s.law.is_normal() {
        let (model, cov) = s.model()?;
        let r = quadrature_least_false(&model, &cov, opts.nodes)?;
        out.push(row(s, Method::QuadratureOracle, r.least_false.alpha_star, None));
    }
    for (method, value) in closed_form_cells(s)? {
        out.push(row(s, method, value, None));
    }
    Ok(out)
}

/// All cells of one table. Monte Carlo cell `i` uses seed
/// `derive_seed(opts.seed, i)`.
pub fn table_rows(which: u8, opts: &TableOptions) -> Result<Vec<TableRow>> {
    if opts.monte_carlo && opts.n < MIN_MC_N {
        return Err(Error::contract(format!("table simulation needs n >= {MIN_MC_N}, got {}", opts.n)));
    }
    let scenarios = table_scenarios(which)?;
    let parts: Vec<Vec<TableRow>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| scenario_rows(s, i, opts))
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io {
        context: "writing CSV".into(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Long-format CSV with a header row.
pub fn rows_to_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_error(e.into_error().into()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

pub const FIGURE1_Q_INV: [f64; 4] = [0.7, 0.8, 0.9, 0.95];
pub const FIGURE1_GRID: usize = 99;

/// Evenly spaced response probabilities on `[0.01, 0.99]`.
pub fn probability_grid(size: usize) -> Result<Vec<f64>> {
    match size {
        0 => Err(Error::contract("grid size must be positive")),
        1 => Ok(vec![0.5]),
        // rounded so the grid prints cleanly and hits 0.5 exactly when size is odd
        _ => Ok((0..size)
            .map(|i| ((0.01 + 0.98 * i as f64 / (size - 1) as f64) * 1e12).round() / 1e12)
            .collect()),
    }
}

/// Correction factor curves: `grid[i]` with one factor per `q̃⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Data {
    pub q_tilde_inv: Vec<f64>,
    pub grid: Vec<f64>,
    /// `curves[j][i]` is the factor for `q_tilde_inv[j]` at `grid[i]`.
    pub curves: Vec<Vec<f64>>,
}

pub fn figure1_data(q_tilde_inv: &[f64], grid_size: usize) -> Result<Figure1Data> {
    let grid = probability_grid(grid_size)?;
    let curves = q_tilde_inv
        .iter()
        .map(|&q| Ok(figure1_curve(q, &grid)?.into_iter().map(|(_, f)| f).collect()))
        .collect::<Result<_>>()?;
    Ok(Figure1Data {
        q_tilde_inv: q_tilde_inv.to_vec(),
        grid,
        curves,
    })
}

impl Figure1Data {
    /// Columns `P`, then `curve_<q>` and `reference_<q>` for each `q̃⁻¹`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["P".to_string()];
        for q in &self.q_tilde_inv {
            header.push(format!("curve_{q}"));
            header.push(format!("reference_{q}"));
        }
        w.write_record(&header).map_err(csv_error)?;
        for (i, p) in self.grid.iter().enumerate() {
            let mut rec = vec![p.to_string()];
            for (j, q) in self.q_tilde_inv.iter().enumerate() {
                rec.push(self.curves[j][i].to_string());
                rec.push(q.to_string());
            }
            w.write_record(&rec).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| csv_error(e.into_error().into()))?;
        String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
    }
}

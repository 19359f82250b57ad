//! Mayo primary biliary cirrhosis trial: loading, covariate transforms and
//! the attenuation ladder for nested logistic models.
//!
//! Columns are matched by name (case-insensitive, common aliases accepted)
//! and extra columns are ignored. Comma, tab and whitespace delimited files
//! are read; `NA`, `.` and empty fields are missing.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariate::{attenuation_radical, CovariateModel, Link};
use crate::error::{Error, Result};
use crate::glm::{fit_with, Dataset, FitOptions};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    Penicillamine,
    Placebo,
    NotRandomized,
}

impl Treatment {
    /// `+1` for penicillamine, `−1` for placebo.
    pub fn coded(self) -> Option<f64> {
        match self {
            Treatment::Penicillamine => Some(1.0),
            Treatment::Placebo => Some(-1.0),
            Treatment::NotRandomized => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbcRecord {
    /// 1-based line in the source file.
    pub line: usize,
    pub id: Option<String>,
    pub treatment: Treatment,
    pub status: Option<i64>,
    pub bilirubin: Option<f64>,
    pub cholesterol: Option<f64>,
    pub albumin: Option<f64>,
    pub copper: Option<f64>,
    pub alk_phos: Option<f64>,
}

impl PbcRecord {
    fn label(&self) -> String {
        match &self.id {
            Some(id) => format!("record {id} (line {})", self.line),
            None => format!("line {}", self.line),
        }
    }

    fn raw_covariates(&self) -> [Option<f64>; 5] {
        [self.bilirubin, self.cholesterol, self.albumin, self.copper, self.alk_phos]
    }
}

/// Analysis covariates in nesting order.
pub const COVARIATE_NAMES: [&str; 5] = [
    "log10 bilirubin",
    "log10 cholesterol",
    "albumin",
    "log10 copper",
    "log10 alkaline phosphatase",
];
const RAW_NAMES: [&str; 5] = ["bilirubin", "cholesterol", "albumin", "copper", "alk_phos"];
const LOGGED: [bool; 5] = [true, true, false, true, true];

#[derive(Debug, Clone)]
pub struct PbcData {
    pub records: Vec<PbcRecord>,
}

impl PbcData {
    pub fn randomized(&self) -> Vec<PbcRecord> {
        self.records
            .iter()
            .filter(|r| r.treatment != Treatment::NotRandomized)
            .cloned()
            .collect()
    }

    pub fn not_randomized_count(&self) -> usize {
        self.records.len() - self.randomized().len()
    }
}

/// Missing-value counts per raw field.
pub fn missingness(records: &[PbcRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (k, name) in RAW_NAMES.iter().enumerate() {
        let missing = records.iter().filter(|r| r.raw_covariates()[k].is_none()).count();
        out.insert((*name).to_string(), missing);
    }
    out.insert(
        "status".into(),
        records.iter().filter(|r| r.status.is_none()).count(),
    );
    out
}

fn is_missing(field: &str) -> bool {
    matches!(field, "" | "NA" | "na" | "." | "NaN")
}

fn column_role(name: &str) -> Option<&'static str> {
    let n = name.trim().trim_matches('"').to_ascii_lowercase();
    Some(match n.as_str() {
        "id" => "id",
        "trt" | "treatment" | "rx" | "drug" => "treatment",
        "status" => "status",
        "bili" | "bilirubin" => "bilirubin",
        "chol" | "cholesterol" => "cholesterol",
        "albumin" | "alb" => "albumin",
        "copper" => "copper",
        "alk.phos" | "alk_phos" | "alkphos" | "alk" => "alk_phos",
        _ => return None,
    })
}

fn split_fields(line: &str, delim: Option<u8>) -> Result<Vec<String>> {
    match delim {
        None => Ok(line.split_whitespace().map(|s| s.trim_matches('"').to_string()).collect()),
        Some(d) => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .delimiter(d)
                .trim(csv::Trim::All)
                .from_reader(line.as_bytes());
            match rdr.records().next() {
                Some(Ok(rec)) => Ok(rec.iter().map(str::to_string).collect()),
                Some(Err(e)) => Err(Error::Schema(e.to_string())),
                None => Ok(Vec::new()),
            }
        }
    }
}

fn parse_number(field: &str, line: usize, column: &str) -> Result<Option<f64>> {
    if is_missing(field) {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse {
            line,
            msg: format!("{column} value {field:?} is not numeric"),
        })
}

fn parse_treatment(field: &str, line: usize) -> Result<Treatment> {
    if is_missing(field) {
        return Ok(Treatment::NotRandomized);
    }
    let lower = field.to_ascii_lowercase();
    if lower.starts_with("d-pen") || lower.starts_with("penicil") {
        return Ok(Treatment::Penicillamine);
    }
    if lower.starts_with("placebo") {
        return Ok(Treatment::Placebo);
    }
    match field.parse::<f64>() {
        Ok(1.0) => Ok(Treatment::Penicillamine),
        Ok(2.0) => Ok(Treatment::Placebo),
        _ => Err(Error::Parse {
            line,
            msg: format!("treatment value {field:?} is neither 1 (penicillamine) nor 2 (placebo)"),
        }),
    }
}

/// Parses PBC records from delimited text with a header row.
pub fn parse_pbc(text: &str) -> Result<PbcData> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::Schema("PBC file is empty".into()));
    };
    let delim = if header.contains(',') {
        Some(b',')
    } else if header.contains('\t') {
        Some(b'\t')
    } else {
        None
    };
    let names = split_fields(header, delim)?;
    let mut index: BTreeMap<&'static str, usize> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        if let Some(role) = column_role(name) {
            index.entry(role).or_insert(i);
        }
    }
    let required = ["treatment", "status", "bilirubin", "cholesterol", "albumin", "copper", "alk_phos"];
    let absent: Vec<&str> = required.iter().copied().filter(|r| !index.contains_key(r)).collect();
    if !absent.is_empty() {
        return Err(Error::Schema(format!(
            "PBC header lacks columns: {} (found {})",
            absent.join(", "),
            names.join(", ")
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let mut fields = split_fields(line, delim)?;
        // R writes an unnamed row-name column ahead of the header fields
        if fields.len() == names.len() + 1 {
            fields.remove(0);
        }
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let get = |role: &str| fields[index[role]].as_str();
        let num = |role: &'static str| parse_number(get(role), lineno, role);
        let status = match num("status")? {
            None => None,
            Some(v) if v.fract() == 0.0 => Some(v as i64),
            Some(v) => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("status {v} is not an integer code"),
                })
            }
        };
        records.push(PbcRecord {
            line: lineno,
            id: index.get("id").map(|&j| fields[j].clone()),
            treatment: parse_treatment(get("treatment"), lineno)?,
            status,
            bilirubin: num("bilirubin")?,
            cholesterol: num("cholesterol")?,
            albumin: num("albumin")?,
            copper: num("copper")?,
            alk_phos: num("alk_phos")?,
        });
    }
    if records.is_empty() {
        return Err(Error::Schema("PBC file has a header but no records".into()));
    }
    Ok(PbcData { records })
}

pub fn load_pbc(path: impl AsRef<Path>) -> Result<PbcData> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    parse_pbc(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop records missing any of the five covariates.
    CompleteCase,
    /// Replace a missing raw value by the mean of the observed ones.
    ImputeMean,
}

/// Covariates on the analysis scale with treatment and status.
#[derive(Debug, Clone)]
pub struct AnalysisData {
    /// `n × 5`, columns as [`COVARIATE_NAMES`].
    pub x: Matrix<f64>,
    pub treatment: Vec<f64>,
    pub status: Vec<Option<i64>>,
    pub policy: MissingPolicy,
    pub excluded: usize,
    pub imputed: usize,
}

/// Applies the missing-data policy and the base-10 log transforms.
pub fn transform_covariates(records: &[PbcRecord], policy: MissingPolicy) -> Result<AnalysisData> {
    if let Some(r) = records.iter().find(|r| r.treatment == Treatment::NotRandomized) {
        return Err(Error::contract(format!(
            "{} is not randomized; pass randomized records only",
            r.label()
        )));
    }
    let means: Vec<Option<f64>> = (0..5)
        .map(|k| {
            let seen: Vec<f64> = records.iter().filter_map(|r| r.raw_covariates()[k]).collect();
            (!seen.is_empty()).then(|| seen.iter().sum::<f64>() / seen.len() as f64)
        })
        .collect();
    let mut rows = Vec::new();
    let mut treatment = Vec::new();
    let mut status = Vec::new();
    let (mut excluded, mut imputed) = (0, 0);
    for r in records {
        let raw = r.raw_covariates();
        if policy == MissingPolicy::CompleteCase && raw.iter().any(Option::is_none) {
            excluded += 1;
            continue;
        }
        let mut row = [0.0; 5];
        for k in 0..5 {
            let v = match raw[k] {
                Some(v) => v,
                None => {
                    imputed += 1;
                    means[k].ok_or_else(|| Error::contract(format!("no observed {} values", RAW_NAMES[k])))?
                }
            };
            row[k] = if LOGGED[k] {
                if !(v > 0.0) {
                    return Err(Error::domain(
                        "log10",
                        format!("{} = {v} in {} must be positive", RAW_NAMES[k], r.label()),
                    ));
                }
                v.log10()
            } else {
                v
            };
        }
        rows.extend(row);
        treatment.push(r.treatment.coded().unwrap_or(0.0));
        status.push(r.status);
    }
    let n = treatment.len();
    Ok(AnalysisData {
        x: Matrix::from_row_major(n, 5, rows)?,
        treatment,
        status,
        policy,
        excluded,
        imputed,
    })
}

/// Status codes counted as the binary outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeDef {
    pub event_codes: Vec<i64>,
}

impl Default for OutcomeDef {
    /// Death (status 2); transplant (1) and censoring (0) are non-events.
    fn default() -> Self {
        OutcomeDef { event_codes: vec![2] }
    }
}

impl OutcomeDef {
    pub fn is_event(&self, status: i64) -> bool {
        self.event_codes.contains(&status)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderStep {
    pub label: String,
    pub fitted: usize,
    pub q_tilde: f64,
}

/// Case-study output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PbcReport {
    pub covariates: Vec<String>,
    /// Full-model covariate coefficients.
    pub beta: Vec<f64>,
    pub alpha_full: f64,
    /// Treatment coefficient of the model with treatment only.
    pub alpha_unadjusted: f64,
    pub omega: Matrix<f64>,
    pub correlations: Matrix<f64>,
    pub q_tilde_ladder: Vec<LadderStep>,
    pub n_used: usize,
    pub n_excluded: usize,
    pub n_imputed: usize,
    pub events: usize,
    pub missingness: BTreeMap<String, usize>,
    pub policy: MissingPolicy,
    pub outcome: OutcomeDef,
}

/// Sample covariance with denominator `n − 1`.
pub fn sample_dispersion(x: &Matrix<f64>) -> Result<Matrix<f64>> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::contract("dispersion needs at least two rows"));
    }
    let means: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    let mut out = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..=a {
            let s: f64 = (0..n).map(|i| (x[(i, a)] - means[a]) * (x[(i, b)] - means[b])).sum();
            out[(a, b)] = s / (n - 1) as f64;
            out[(b, a)] = out[(a, b)];
        }
    }
    Ok(out)
}

fn correlation_matrix(omega: &Matrix<f64>) -> Matrix<f64> {
    let d = omega.rows();
    let mut out = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            out[(a, b)] = omega[(a, b)] / (omega[(a, a)] * omega[(b, b)]).sqrt();
        }
    }
    out
}

/// `q̃` for the nested sequence where the first `k` covariates are fitted
/// and the rest omitted, `k = 0..5`.
pub fn q_tilde_ladder(beta: &[f64], omega: &Matrix<f64>) -> Result<Vec<LadderStep>> {
    let d = beta.len();
    (0..d)
        .map(|k| {
            let cov = CovariateModel::randomized(vec![0.0; d], omega.clone(), k)?;
            let label = if k == 0 {
                "none".to_string()
            } else {
                format!("+{}", COVARIATE_NAMES[k - 1])
            };
            Ok(LadderStep {
                label,
                fitted: k,
                q_tilde: attenuation_radical(&cov, &beta[k..], Link::Logistic)?,
            })
        })
        .collect()
}

/// Fits the full logistic model and computes dispersion, correlations and
/// the `q̃` ladder.
pub fn pbc_case_study(
    records: &[PbcRecord],
    outcome: &OutcomeDef,
    policy: MissingPolicy,
) -> Result<PbcReport> {
    let data = transform_covariates(records, policy)?;
    let n = data.treatment.len();
    let mut y = Vec::with_capacity(n);
    for (i, s) in data.status.iter().enumerate() {
        match s {
            Some(code) => y.push(u8::from(outcome.is_event(*code))),
            None => return Err(Error::contract(format!("analysis row {i} has no status"))),
        }
    }
    let mut full = Vec::with_capacity(n * 7);
    let mut unadjusted = Vec::with_capacity(n * 2);
    for i in 0..n {
        full.extend([1.0, data.treatment[i]]);
        full.extend_from_slice(data.x.row(i));
        unadjusted.extend([1.0, data.treatment[i]]);
    }
    let opts = FitOptions::default();
    let fit_full = fit_with(&Dataset::new(y.clone(), Matrix::from_row_major(n, 7, full)?)?, Link::Logistic, &opts)?;
    let fit_unadj = fit_with(&Dataset::new(y.clone(), Matrix::from_row_major(n, 2, unadjusted)?)?, Link::Logistic, &opts)?;
    for (name, f) in [("full model", &fit_full), ("treatment-only model", &fit_unadj)] {
        if !f.converged {
            return Err(Error::Convergence {
                solver: "IRLS",
                iterations: f.iterations,
                residual: f.max_score,
            }
            .in_scenario(format!("PBC {name}")));
        }
    }
    let beta = fit_full.coefficients[2..].to_vec();
    let omega = sample_dispersion(&data.x)?;
    Ok(PbcReport {
        covariates: COVARIATE_NAMES.iter().map(|s| s.to_string()).collect(),
        q_tilde_ladder: q_tilde_ladder(&beta, &omega)?,
        correlations: correlation_matrix(&omega),
        alpha_full: fit_full.coefficients[1],
        alpha_unadjusted: fit_unadj.coefficients[1],
        beta,
        omega,
        n_used: n,
        n_excluded: data.excluded,
        n_imputed: data.imputed,
        events: y.iter().filter(|&&v| v == 1).count(),
        missingness: missingness(records),
        policy,
        outcome: outcome.clone(),
    })
}

//! `omitbias` command-line front end.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use omitbias::bias::correction_report;
use omitbias::oracle::{monte_carlo_least_false, quadrature_for_scenario, DEFAULT_N, DEFAULT_NODES, DEFAULT_SEED};
use omitbias::pbc::{load_pbc, pbc_case_study, MissingPolicy, OutcomeDef, COVARIATE_NAMES};
use omitbias::tables::{figure1_data, rows_to_csv, table_rows, TableOptions, FIGURE1_GRID, FIGURE1_Q_INV};
use omitbias::{Error, ErrorKind, Link, ModelSpec, OracleResult, ScenarioSpec};

use output::{deliver, sha256_hex, sig4, text_table, Emitted, RunClock};

#[derive(Parser)]
#[command(
    name = "omitbias",
    version,
    about = "Treatment-effect attenuation in logistic and probit regressions that omit covariates",
    after_help = "Exit codes: 0 success, 2 schema or contract error, 3 numerical failure, 4 I/O error.\n\
                  With --out, a <out>.manifest.json sidecar records the command, input digest, seed, \
                  version and timing."
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed for simulation [default: 1]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulated sample size [default: 200000]
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Output format; the default depends on the command
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write output to this file instead of stdout, plus a manifest sidecar
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleMethod {
    Quadrature,
    MonteCarlo,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form least-false treatment effect under every applicable method [default format: text]
    Correct {
        /// Model JSON: nu_plus, nu_minus, omega, p, q, link, mu, alpha, beta1, beta2,
        /// optional binary_block and p_treat
        model: PathBuf,
        /// Evaluate with this link instead of the one in the file
        #[arg(long, value_enum)]
        link: Option<LinkArg>,
    },
    /// Simulation table 1, 2 or 3 in long format [default format: csv]
    #[command(long_about = "Simulation table 1, 2 or 3 in long format [default format: csv].\n\n\
        One row per (scenario, method) with columns\n\
        table,block,alpha,beta,mu,p,q,link,law,method,value,mc_se.\n\
        method is monte_carlo_oracle (value = mean least-false alpha from a simulated trial of\n\
        size --n, mc_se = jackknife standard error over 20 blocks), quadrature_oracle (Gaussian\n\
        laws only), or one of the closed forms skew_normal, gail, neuhaus, probit_exact.\n\
        Scenario i is simulated with a seed derived from --seed and i, so reruns with the same\n\
        flags are byte-identical.")]
    Table {
        /// Which table
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        /// Gauss-Hermite nodes per dimension for the quadrature oracle
        #[arg(long, default_value_t = DEFAULT_NODES)]
        nodes: usize,
        /// Skip the quadrature oracle
        #[arg(long)]
        no_quadrature: bool,
        /// Skip the Monte Carlo oracle
        #[arg(long)]
        no_monte_carlo: bool,
    },
    /// Correction-factor curves against the response probability [default format: csv]
    Figure1 {
        /// Values of 1/q-tilde, each in (0, 1]
        #[arg(long = "q-tilde-inv", value_delimiter = ',', default_values_t = FIGURE1_Q_INV.to_vec())]
        q_tilde_inv: Vec<f64>,
        /// Number of probabilities on [0.01, 0.99]
        #[arg(long, default_value_t = FIGURE1_GRID)]
        grid: usize,
    },
    /// Logistic case study on the PBC trial data [default format: json]
    Pbc {
        /// Delimited PBC data file (comma, tab or whitespace)
        data: PathBuf,
        /// Replace missing covariate values by the observed mean instead of dropping the record
        #[arg(long)]
        impute_mean: bool,
        /// Status codes counted as events
        #[arg(long, value_delimiter = ',', default_values_t = vec![2i64])]
        event_codes: Vec<i64>,
    },
    /// Quadrature and/or Monte Carlo least-false values for a scenario file [default format: json]
    Oracle {
        /// Scenario JSON: the model keys plus optional covariate_law, n, seed, fitted_link
        scenario: PathBuf,
        /// Oracle to run; by default both when the law is Normal, else Monte Carlo
        #[arg(long, value_enum)]
        method: Option<OracleMethod>,
        #[arg(long, default_value_t = DEFAULT_NODES)]
        nodes: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkArg {
    Logistic,
    Probit,
}

impl From<LinkArg> for Link {
    fn from(l: LinkArg) -> Link {
        match l {
            LinkArg::Logistic => Link::Logistic,
            LinkArg::Probit => Link::Probit,
        }
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        context: format!("reading {}", path.display()),
        source,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(sig4).unwrap_or_else(|| "-".into())
}

fn cmd_correct(model: &Path, link: Option<LinkArg>, format: Format) -> Result<Emitted> {
    let text = read_text(model)?;
    let parsed: ModelSpec =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", model.display())))?;
    let (mut true_model, cov) = parsed.resolve()?;
    if let Some(l) = link {
        true_model = true_model.with_link(l.into());
    }
    let report = correction_report(&true_model, &cov)?;
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let rows: Vec<CorrectRow> = report
                .estimates
                .iter()
                .map(|e| CorrectRow {
                    method: e.method.to_string(),
                    link: e.link.to_string(),
                    alpha_star: e.alpha_star,
                    mu_star: e.mu_star,
                })
                .collect();
            rows_to_csv(&rows)?
        }
        Format::Text => {
            let mut out = format!(
                "link {}   alpha {}   v {}   q-tilde {}   P(Y=1|T=+1) {}   P(Y=1|T=-1) {}\n\n",
                report.link,
                sig4(report.alpha),
                sig4(report.omitted_variance),
                sig4(report.q_tilde),
                sig4(report.outcome_prob_plus),
                sig4(report.outcome_prob_minus)
            );
            let rows: Vec<Vec<String>> = report
                .estimates
                .iter()
                .map(|e| vec![e.method.to_string(), sig4(e.alpha_star), opt(e.mu_star)])
                .collect();
            out.push_str(&text_table(&["method", "alpha*", "mu*"], &rows));
            out
        }
    };
    let scenario = serde_json::to_value(ModelSpec::from_parts(&true_model, &cov))?;
    Ok(Emitted {
        body,
        scenario,
        seed: None,
        n: None,
        details: None,
    })
}

#[derive(Serialize)]
struct CorrectRow {
    method: String,
    link: String,
    alpha_star: f64,
    mu_star: Option<f64>,
}

#[derive(Serialize)]
struct LadderRow<'a> {
    fitted: usize,
    added: &'a str,
    q_tilde: f64,
}

#[derive(Serialize)]
struct OracleRow {
    method: String,
    coefficient: String,
    value: Option<f64>,
    std_error: Option<f64>,
}

fn cmd_table(which: u8, opts: TableOptions, format: Format) -> Result<Emitted> {
    let rows = table_rows(which, &opts)?;
    let body = match format {
        Format::Csv => rows_to_csv(&rows)?,
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Text => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.block.to_string(),
                        sig4(r.alpha),
                        sig4(r.beta),
                        sig4(r.mu),
                        r.p.to_string(),
                        r.q.to_string(),
                        r.link.to_string(),
                        r.law.clone(),
                        r.method.to_string(),
                        sig4(r.value),
                        opt(r.mc_se),
                    ]
                })
                .collect();
            text_table(
                &["block", "alpha", "beta", "mu", "p", "q", "link", "law", "method", "value", "mc_se"],
                &cells,
            )
        }
    };
    let scenario = json!({
        "table": which,
        "n": opts.n,
        "seed": opts.seed,
        "nodes": opts.nodes,
        "monte_carlo": opts.monte_carlo,
        "quadrature": opts.quadrature,
    });
    Ok(Emitted {
        body,
        scenario,
        seed: opts.monte_carlo.then_some(opts.seed),
        n: opts.monte_carlo.then_some(opts.n),
        details: None,
    })
}

fn cmd_figure1(q_tilde_inv: &[f64], grid: usize, format: Format) -> Result<Emitted> {
    let data = figure1_data(q_tilde_inv, grid)?;
    let body = match format {
        Format::Csv => data.to_csv()?,
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "q_tilde_inv": data.q_tilde_inv,
                "P": data.grid,
                "curves": data.curves,
            }))? + "\n"
        }
        Format::Text => {
            let mut header = vec!["P".to_string()];
            header.extend(data.q_tilde_inv.iter().map(|q| format!("q_inv={q}")));
            let rows: Vec<Vec<String>> = data
                .grid
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut r = vec![sig4(*p)];
                    r.extend(data.curves.iter().map(|c| sig4(c[i])));
                    r
                })
                .collect();
            text_table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)
        }
    };
    Ok(Emitted {
        body,
        scenario: json!({"q_tilde_inv": q_tilde_inv, "grid": grid}),
        seed: None,
        n: None,
        details: None,
    })
}

fn cmd_pbc(data: &Path, impute_mean: bool, event_codes: Vec<i64>, format: Format) -> Result<Emitted> {
    let bytes = std::fs::read(data).map_err(|source| Error::Io {
        context: format!("reading {}", data.display()),
        source,
    })?;
    let records = load_pbc(data)?;
    let policy = if impute_mean {
        MissingPolicy::ImputeMean
    } else {
        MissingPolicy::CompleteCase
    };
    let outcome = OutcomeDef { event_codes };
    let report = pbc_case_study(&records.randomized(), &outcome, policy)?;
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let rows: Vec<LadderRow> = report
                .q_tilde_ladder
                .iter()
                .map(|s| LadderRow {
                    fitted: s.fitted,
                    added: &s.label,
                    q_tilde: s.q_tilde,
                })
                .collect();
            rows_to_csv(&rows)?
        }
        Format::Text => pbc_text(&report),
    };
    let scenario = json!({
        "data_sha256": sha256_hex(&bytes),
        "policy": policy,
        "event_codes": outcome.event_codes,
    });
    Ok(Emitted {
        body,
        details: Some(json!({"policy": policy, "event_codes": outcome.event_codes})),
        scenario,
        seed: None,
        n: None,
    })
}

fn pbc_text(r: &omitbias::pbc::PbcReport) -> String {
    let mut out = format!(
        "{} records used ({} events), {} excluded, {} imputed; missing-data policy {:?}; event codes {:?}\n\n",
        r.n_used, r.events, r.n_excluded, r.n_imputed, r.policy, r.outcome.event_codes
    );
    let mut names = vec![""];
    names.extend(COVARIATE_NAMES);
    let mut rows = vec![{
        let mut row = vec!["coefficient".to_string()];
        row.extend(r.beta.iter().map(|b| sig4(*b)));
        row
    }];
    for (i, name) in COVARIATE_NAMES.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend((0..COVARIATE_NAMES.len()).map(|j| sig4(r.correlations[(i, j)])));
        rows.push(row);
    }
    out.push_str(&text_table(&names, &rows));
    out.push_str(&format!(
        "\ntreatment coefficient: adjusted {}, unadjusted {}\n\n",
        sig4(r.alpha_full),
        sig4(r.alpha_unadjusted)
    ));
    let ladder: Vec<Vec<String>> = r
        .q_tilde_ladder
        .iter()
        .map(|s| vec![s.fitted.to_string(), s.label.clone(), sig4(s.q_tilde)])
        .collect();
    out.push_str(&text_table(&["fitted", "added", "q_tilde"], &ladder));
    out
}

fn cmd_oracle(path: &Path, method: Option<OracleMethod>, nodes: usize, g: &Global, format: Format) -> Result<Emitted> {
    let mut spec = ScenarioSpec::from_json(&read_text(path)?).map_err(|e| e.in_scenario(path.display().to_string()))?;
    if let Some(n) = g.n {
        spec.n = n;
    }
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    let method = method.unwrap_or(
        if spec.covariate_law.is_normal() && spec.fitted_link == spec.true_model.link && spec.true_model.binary_block.is_none() {
            OracleMethod::Both
        } else {
            OracleMethod::MonteCarlo
        },
    );
    let mut results: Vec<OracleResult> = Vec::new();
    if matches!(method, OracleMethod::Quadrature | OracleMethod::Both) {
        results.push(quadrature_for_scenario(&spec, nodes)?);
    }
    let simulated = matches!(method, OracleMethod::MonteCarlo | OracleMethod::Both);
    if simulated {
        results.push(monte_carlo_least_false(&spec)?);
    }
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&json!({"scenario": spec, "results": results}))? + "\n",
        Format::Csv | Format::Text => {
            let mut rows = Vec::new();
            for r in &results {
                let lf = &r.least_false;
                let mut coefs = vec![("mu".to_string(), lf.mu_star), ("alpha".to_string(), Some(lf.alpha_star))];
                if r.gamma_star.is_some() {
                    coefs.push(("gamma".into(), r.gamma_star));
                }
                if let Some(b) = &lf.beta1_star {
                    coefs.extend(b.iter().enumerate().map(|(i, v)| (format!("beta1_{}", i + 1), Some(*v))));
                }
                for (i, (coefficient, value)) in coefs.into_iter().enumerate() {
                    rows.push(OracleRow {
                        method: lf.method.to_string(),
                        coefficient,
                        value,
                        std_error: r.mc_std_error.as_ref().map(|s| s[i]),
                    });
                }
            }
            if format == Format::Csv {
                rows_to_csv(&rows)?
            } else {
                let cells: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| vec![r.method.clone(), r.coefficient.clone(), opt(r.value), opt(r.std_error)])
                    .collect();
                text_table(&["method", "coefficient", "value", "std_error"], &cells)
            }
        }
    };
    Ok(Emitted {
        body,
        scenario: spec.to_json_value(),
        seed: simulated.then_some(spec.seed),
        n: simulated.then_some(spec.n),
        details: None,
    })
}

fn run(cli: Cli) -> Result<()> {
    let clock = RunClock::start();
    let g = &cli.global;
    let (name, emitted) = match cli.command {
        Command::Correct { model, link } => ("correct", cmd_correct(&model, link, g.format.unwrap_or(Format::Text))?),
        Command::Table {
            which,
            nodes,
            no_quadrature,
            no_monte_carlo,
        } => {
            let opts = TableOptions {
                n: g.n.unwrap_or(DEFAULT_N),
                seed: g.seed.unwrap_or(DEFAULT_SEED),
                nodes,
                monte_carlo: !no_monte_carlo,
                quadrature: !no_quadrature,
            };
            ("table", cmd_table(which, opts, g.format.unwrap_or(Format::Csv))?)
        }
        Command::Figure1 { q_tilde_inv, grid } => ("figure1", cmd_figure1(&q_tilde_inv, grid, g.format.unwrap_or(Format::Csv))?),
        Command::Pbc {
            data,
            impute_mean,
            event_codes,
        } => ("pbc", cmd_pbc(&data, impute_mean, event_codes, g.format.unwrap_or(Format::Json))?),
        Command::Oracle { scenario, method, nodes } => (
            "oracle",
            cmd_oracle(&scenario, method, nodes, g, g.format.unwrap_or(Format::Json))?,
        ),
    };
    deliver(name, &emitted, g.out.as_deref(), &clock)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.kind() {
                ErrorKind::Contract => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Io => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

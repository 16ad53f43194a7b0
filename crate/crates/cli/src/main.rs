//! `formalcalc`: run pairings, operator actions, jets, partitions of unity
//! and the sheaf/cosheaf check suites on JSON scenario files.
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad input.

mod scenario;
mod suites;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use formalcalc::distributions::parse_point;
use formalcalc::sheaf::{build_pou, POU_GRID};
use formalcalc::{dist_space_dimension, jet_kernel_check, jet_table, Backend, QuadConfig};
use serde_json::{json, Value};
use thiserror::Error;

use scenario::{Scenario, ScenarioError, Suite};
use suites::Runner;

#[derive(Parser, Debug)]
#[command(name = "formalcalc", version, about = "Formal functions, densities and distributions on a scenario file")]
struct Cli {
    /// Scenario file (JSON, "schema": 1).
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Emit a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Tolerance for numerical comparisons on the line backend.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Seed for randomized instances.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Truncation order override (jets, partitions of unity, suites).
    #[arg(long, global = true)]
    trunc: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pair a formal density with a formal function.
    Pair {
        #[arg(long)]
        density: String,
        #[arg(long)]
        function: String,
    },
    /// The formal density of a differential operator.
    Rho {
        #[arg(long)]
        operator: String,
    },
    /// Apply a differential operator to a formal function.
    Apply {
        #[arg(long)]
        operator: String,
        #[arg(long)]
        function: String,
    },
    /// Tabulate the jets of a function at a point up to `--trunc` (default: its truncation).
    Jet {
        #[arg(long)]
        function: String,
        /// Point label (discrete) or rational coordinate (line).
        #[arg(long)]
        point: String,
    },
    /// Run check suites: mv, glue, cosheaf, flabby, duality, jets or all.
    Check {
        /// Suite to run; repeatable. Defaults to the scenario's "checks" list.
        #[arg(long)]
        suite: Vec<String>,
    },
    /// Build the partition of unity of a named cover.
    Pou {
        #[arg(long)]
        cover: String,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Engine(#[from] formalcalc::Error),
    #[error("{0}")]
    Usage(String),
}

struct Outcome {
    report: Value,
    text: String,
    pass: bool,
}

fn ok(report: Value, text: String) -> Outcome {
    Outcome { report, text, pass: true }
}

fn load(cli: &Cli) -> Result<Scenario, CliError> {
    let path = cli.scenario.as_deref().ok_or_else(|| CliError::Usage("--scenario <path> is required".into()))?;
    Ok(Scenario::load(path)?)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let sc = load(cli)?;
    match &cli.command {
        Command::Pair { density, function } => {
            let eta = sc.density(density)?;
            let u = sc.function(function)?;
            let terms = eta.pair_terms(u, QuadConfig::default())?;
            let value = terms.iter().fold(formalcalc::Scalar::zero(), |a, (_, v)| a + v.clone());
            let mut text = format!("<{density}, {function}> = {value}\n");
            for (l, v) in &terms {
                text.push_str(&format!("  L = {l}: {v}\n"));
            }
            let terms: Vec<Value> = terms.iter().map(|(l, v)| json!({"L": l, "value": v})).collect();
            Ok(ok(
                json!({"command": "pair", "density": density, "function": function, "value": value, "terms": terms}),
                text,
            ))
        }
        Command::Rho { operator } => {
            let d = sc.operator(operator)?;
            let rho = d.rho();
            let body = rho.to_json();
            let text = format!("rho({operator}) = {}\n", serde_json::to_string(&body).unwrap_or_default());
            Ok(ok(json!({"command": "rho", "operator": operator, "density": body}), text))
        }
        Command::Apply { operator, function } => {
            let d = sc.operator(operator)?;
            let u = sc.function(function)?;
            let out = d.apply(u)?;
            let integral = out.integrate(d.domain())?;
            let body = out.to_json();
            let text = format!(
                "{operator}({function}) = {}\nintegral = {integral}\n",
                serde_json::to_string(&body).unwrap_or_default()
            );
            Ok(ok(
                json!({"command": "apply", "operator": operator, "function": function, "density": body, "integral": integral}),
                text,
            ))
        }
        Command::Jet { function, point } => {
            let u = sc.function(function)?;
            let a = parse_point(&Value::String(point.clone()), sc.backend)?;
            let r = cli.trunc.unwrap_or(u.trunc());
            let table = jet_table(u, &a, r)?;
            let in_power = jet_kernel_check(u, &a, r)?;
            let dim = dist_space_dimension(sc.backend.x_dim(), sc.k, r);
            let mut text = format!("jets of {function} at {a}, |I|+|J| <= {r}\n");
            for (i, j, v) in &table {
                text.push_str(&format!("  I = {i}, J = {j}: {v}\n"));
            }
            text.push_str(&format!("dimension {dim}\nin m_a^{r}: {in_power}\n"));
            let rows: Vec<Value> = table.iter().map(|(i, j, v)| json!({"I": i, "J": j, "value": v})).collect();
            Ok(ok(
                json!({
                    "command": "jet", "function": function, "point": a.to_string(), "order": r,
                    "dimension": dim.to_string(), "in_m_a_r": in_power, "table": rows,
                }),
                text,
            ))
        }
        Command::Check { suite } => {
            let mut suites: Vec<Suite> = Vec::new();
            let names: Vec<String> = if suite.is_empty() {
                sc.checks.iter().map(Suite::to_string).collect()
            } else {
                suite.clone()
            };
            for n in names {
                if n == "all" {
                    suites.extend(Suite::ALL);
                } else {
                    suites.push(n.parse()?);
                }
            }
            suites.sort();
            suites.dedup();
            let runner = Runner::new(&sc, cli.seed, cli.tol, cli.trunc);
            let reports: Vec<_> = suites.iter().map(|s| runner.run(*s)).collect();
            let pass = reports.iter().all(|r| r.pass);
            let checks: usize = reports.iter().map(|r| r.checks).sum();
            let mut text = String::new();
            for r in &reports {
                text.push_str(&format!(
                    "{} {}: {} checks, max residual {:e}\n",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.suite,
                    r.checks,
                    r.max_residual
                ));
                for f in &r.failures {
                    match f.residual {
                        Some(x) => text.push_str(&format!("  witness {}: {} ({x:e})\n", f.witness, f.detail)),
                        None => text.push_str(&format!("  witness {}: {}\n", f.witness, f.detail)),
                    }
                }
            }
            text.push_str(&format!("{}: {checks} checks in {} suites\n", if pass { "pass" } else { "fail" }, reports.len()));
            Ok(Outcome {
                report: json!({
                    "command": "check", "seed": cli.seed, "tol": cli.tol,
                    "pass": pass, "checks": checks, "suites": reports,
                }),
                text,
                pass,
            })
        }
        Command::Pou { cover } => {
            let c = sc.cover(cover)?;
            let trunc = cli.trunc.unwrap_or(sc.trunc);
            let pou = build_pou(c, sc.k, trunc)?;
            let functions: Vec<Value> = pou.functions().iter().map(|f| f.to_json()).collect();
            let defect_zero = pou.defect()?.is_zero();
            let grid = match sc.backend {
                Backend::Line => Some(pou.grid_residual(POU_GRID)),
                Backend::Discrete => None,
            };
            let mut text = format!("partition of unity for {cover} ({} parts, trunc {trunc})\n", c.len());
            for (a, f) in functions.iter().enumerate() {
                text.push_str(&format!("  f{a} = {}\n", serde_json::to_string(f).unwrap_or_default()));
            }
            text.push_str(&format!("sum - 1 is identically zero: {defect_zero}\n"));
            if let Some(g) = grid {
                text.push_str(&format!("grid residual ({POU_GRID} points): {g:e}\n"));
            }
            let mut report = json!({
                "command": "pou", "cover": cover, "trunc": trunc, "functions": functions, "defect_zero": defect_zero,
            });
            if let Some(g) = grid {
                report["grid_residual"] = json!(g);
            }
            Ok(ok(report, text))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            let text = if cli.json {
                serde_json::to_string_pretty(&out.report).unwrap_or_default() + "\n"
            } else {
                out.text
            };
            // a closed pipe is not an error worth reporting
            let _ = std::io::stdout().write_all(text.as_bytes());
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&json!({"error": e.to_string()})).unwrap_or_default());
            }
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

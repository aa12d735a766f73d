use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use gridflood::geometry::PfVariant;
use gridflood::twostage::{ModelKind, StudyOptions};
use gridflood_cli::commands::{self, SweepSpec};
use gridflood_cli::{exit_code, parse_budgets, Failure, InputPaths, CONFIG_ENV};

#[derive(Parser)]
#[command(name = "gridflood", version, about = "Flood mitigation planning for transmission grids")]
struct Cli {
    /// JSON config overriding the case's config block.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArgs {
    #[arg(long)]
    case: PathBuf,
    #[arg(long)]
    scenarios: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a case and scenario set; exits 1 listing every problem.
    Validate(CaseArgs),
    /// Solve every (kind, variant, budget) cell and append to the ledger.
    Sweep {
        #[command(flatten)]
        inputs: CaseArgs,
        /// Comma-separated model kinds, e.g. SP,RO,EWS.
        #[arg(long, default_value = "SP,RO")]
        kind: String,
        /// Comma-separated power flow variants.
        #[arg(long, default_value = "DC")]
        pf: String,
        /// `0..4`, `0,2,3` or `auto` (up to the SP threshold).
        #[arg(long, default_value = "auto")]
        budget: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip the greedy warm start.
        #[arg(long)]
        no_warmstart: bool,
    },
    /// Compare plans of two sweep ledgers.
    Similarity {
        #[command(flatten)]
        inputs: CaseArgs,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "similarity.csv")]
        out: PathBuf,
    },
    /// Optimal and equidistant cosine tangent points.
    Geometry {
        #[arg(long, default_value_t = 7)]
        t: usize,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
        theta_delta_max: f64,
        /// Directory for envelope.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 401)]
        samples: usize,
    },
    /// Write a model in LP format, optionally cross-checking an external solver.
    ExportLp {
        #[command(flatten)]
        inputs: CaseArgs,
        #[arg(long, default_value = "SP")]
        kind: String,
        #[arg(long, default_value = "DC")]
        pf: String,
        #[arg(long, default_value_t = 0)]
        budget: u64,
        #[arg(long)]
        out: PathBuf,
        /// Program called as `<path> <lp file>` that prints its optimum last.
        #[arg(long)]
        external_solver: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Sample big-M right-hand sides against their calibrated bounds.
    BigmAudit {
        #[arg(long)]
        case: PathBuf,
        /// Comma-separated variants; all by default.
        #[arg(long, default_value = "DC,LPAC-C,LPAC-F,QPAC")]
        pf: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-solve with a no-good cut to test whether the optimal plan is unique.
    Uniqueness {
        #[command(flatten)]
        inputs: CaseArgs,
        #[arg(long, default_value = "SP")]
        kind: String,
        #[arg(long, default_value = "DC")]
        pf: String,
        #[arg(long)]
        budget: u64,
    },
}

fn list<T>(s: &str, parse: impl Fn(&str) -> gridflood::Result<T>) -> Result<Vec<T>> {
    Ok(s.split(',').filter(|p| !p.trim().is_empty()).map(|p| parse(p.trim())).collect::<gridflood::Result<_>>()?)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn paths(args: CaseArgs, config: &Option<PathBuf>) -> InputPaths {
    InputPaths { case: args.case, scenarios: args.scenarios, config: config.clone() }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config;
    match cli.command {
        Command::Validate(args) => {
            let report = commands::validate(&paths(args, &config))?;
            if report.problems.is_empty() {
                println!("ok");
                Ok(())
            } else {
                for p in &report.problems {
                    eprintln!("  {p}");
                }
                Err(Failure::validation(format!("{} problem(s)", report.problems.len())))
            }
        }
        Command::Sweep { inputs, kind, pf, budget, out, no_warmstart } => {
            let spec = SweepSpec {
                budgets: parse_budgets(&budget)?,
                kinds: list(&kind, ModelKind::parse)?,
                variants: list(&pf, PfVariant::parse)?,
                out,
                options: StudyOptions { warmstart: !no_warmstart, ..StudyOptions::default() },
            };
            let summary = commands::sweep(&paths(inputs, &config), &spec)?;
            print_json(&summary)?;
            if summary.failures > 0 {
                return Err(Failure::solver(format!("{} of {} cells failed", summary.failures, summary.rows)));
            }
            Ok(())
        }
        Command::Similarity { inputs, a, b, out } => {
            let rows = commands::similarity(&a, &b, &paths(inputs, &config), &StudyOptions::default())?;
            commands::write_csv(
                &out,
                &rows,
                &["case", "model", "budget", "pf_a", "pf_b", "abs_sim", "rel_sim", "gap_ab", "gap_ba", "gap_kind"],
            )?;
            println!("{} differing cell(s) written to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Geometry { t, theta_delta_max, out, samples } => {
            print_json(&commands::geometry(t, theta_delta_max, out.as_deref(), samples)?)
        }
        Command::ExportLp { inputs, kind, pf, budget, out, external_solver, tol } => {
            let report = commands::export(
                &paths(inputs, &config),
                ModelKind::parse(&kind)?,
                PfVariant::parse(&pf)?,
                budget,
                &out,
                external_solver.as_deref(),
                tol,
            )?;
            print_json(&report)
        }
        Command::BigmAudit { case, pf, samples, seed, out } => {
            let inputs = InputPaths { case, scenarios: None, config }.load()?;
            let rows = commands::bigm_audit(&inputs.case, &list(&pf, PfVariant::parse)?, samples, seed);
            if let Some(p) = out {
                commands::write_csv(&p, &rows, &[])?;
            }
            let bad = rows.iter().filter(|r| r.max_violation > 0.0).count();
            println!("{} bound(s) audited, {bad} violated", rows.len());
            if bad > 0 {
                return Err(Failure::validation(format!("{bad} big-M bound(s) exceeded by samples")));
            }
            Ok(())
        }
        Command::Uniqueness { inputs, kind, pf, budget } => {
            let inputs = paths(inputs, &config).load()?;
            let set = inputs.scenarios()?.clone();
            let report = commands::uniqueness(
                &inputs,
                &set,
                ModelKind::parse(&kind)?,
                PfVariant::parse(&pf)?,
                budget,
                &StudyOptions::default(),
            )?;
            print_json(&report)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

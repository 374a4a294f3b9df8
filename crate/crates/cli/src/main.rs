use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use translab::exec::with_threads;
use translab_cli::config::{Format, ScenarioConfig};
use translab_cli::registry::{listing, registry};
use translab_cli::scenario::{emit_report, report_json, run_scenario, Outcome};

/// Numerical transversality laboratory.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads for the data-parallel kernels.
    #[arg(long, global = true, env = "TRANSLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the scenario described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; without it the report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        budget: Option<usize>,
        /// Relative rank tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List the registered problems.
    ListProblems {
        /// Print the full registry as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn execute(cfg: &ScenarioConfig, threads: Option<usize>) -> anyhow::Result<Outcome> {
    match threads {
        Some(t) => with_threads(t, || run_scenario(cfg)),
        None => run_scenario(cfg),
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Cmd::ListProblems { json } => {
            if json {
                println!("{}", serde_json::to_string_pretty(&registry())?);
            } else {
                print!("{}", listing());
            }
            Ok(0)
        }
        Cmd::Run {
            config,
            seed,
            out,
            format,
            budget,
            tol,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.seed = seed.or(cfg.seed);
            cfg.budget = budget.or(cfg.budget);
            cfg.tol = tol.or(cfg.tol);
            let format = format.or(cfg.format).unwrap_or_default();
            let out = out.or_else(|| cfg.out_dir.clone());
            let outcome = execute(&cfg, cli.threads)?;
            match out {
                Some(dir) => {
                    for path in emit_report(&outcome, &dir, format)? {
                        eprintln!("wrote {}", path.display());
                    }
                }
                None => match (format, &outcome.csv) {
                    (Format::Csv, Some(csv)) => print!("{}", String::from_utf8_lossy(csv)),
                    (Format::Csv, None) => anyhow::bail!("command `{}` has no CSV output", outcome.report.command),
                    (Format::Json, _) => print!("{}", report_json(&outcome.report)?),
                },
            }
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ricci_lab::checks::{run_checks, CheckOptions};
use ricci_lab::config::RunConfig;
use ricci_lab::lab::{run_balance, run_simulate, RunReport};
use ricci_lab::Result;

#[derive(Parser)]
#[command(name = "ricci-lab", version, about = "Rotationally symmetric Ricci flow experiments on S^3")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Record a snapshot every k accepted steps (overrides the config).
    #[arg(long, global = true)]
    stride: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured profile and run its monitors.
    Simulate { config: PathBuf },
    /// Balance a measure file of `nx,ny,nz,weight` rows.
    Balance {
        measure: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Run the invariant suites on the fixture fleet.
    Check { config: PathBuf },
    /// Summarise the report of a finished run.
    Report { run_dir: PathBuf },
}

/// 0 on success, 1 on monitor violations or failed suites.
fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = RunConfig::read(config)?;
            let report = run_simulate(&cfg, &cli.out, cli.stride)?;
            if !cli.quiet || report.exit_code() != 0 {
                print!("{}", report.summary());
            }
            Ok(report.exit_code() as u8)
        }
        Command::Balance { measure, tol } => {
            let report = run_balance(measure, *tol, &cli.out)?;
            if !cli.quiet {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            Ok(0)
        }
        Command::Check { config } => {
            let cfg = RunConfig::read(config)?;
            let summary = run_checks(&CheckOptions {
                seed: cfg.seed,
                n_cells: cfg.n_cells,
                tolerances: cfg.tolerances,
                ..CheckOptions::default()
            });
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(cli.out.join("checks.json"), summary.to_json()?)?;
            if !cli.quiet || !summary.all_passed() {
                print!("{}", summary.table());
            }
            Ok(u8::from(!summary.all_passed()))
        }
        Command::Report { run_dir } => {
            let report = RunReport::read(run_dir)?;
            if !cli.quiet || report.exit_code() != 0 {
                print!("{}", report.summary());
            }
            Ok(report.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

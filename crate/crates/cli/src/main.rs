//! Command line driver: single runs, parameter sweeps and the validation suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use floquet_dmft::dmft::SolverConfig;

mod artifacts;
mod commands;
mod config;
mod error;
mod validate;

use config::ConfigFile;
use error::CliError;

#[derive(Parser)]
#[command(name = "floquet-dmft", version, about = "Steady states of the periodically driven Hubbard model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write gnuplot scripts next to the data.
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one parameter set.
    Run(Common),
    /// Solve a list or range of Omega_L (and T) values with warm starts.
    Sweep(Common),
    /// Run the analytic oracles and the sum-rule envelope.
    Validate(Common),
}

fn load(common: &Common) -> Result<ConfigFile, CliError> {
    match &common.config {
        Some(path) => ConfigFile::load(path),
        None => ConfigFile::parse(""),
    }
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    let common = match &cli.command {
        Command::Run(c) | Command::Sweep(c) | Command::Validate(c) => c,
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    }
    let config = load(common)?;
    match &cli.command {
        Command::Run(c) => Ok(commands::run(&config, &c.out, c.emit_plots)?.exit_code()),
        Command::Sweep(c) => Ok(commands::sweep(&config, &c.out, c.emit_plots)?.exit_code()),
        Command::Validate(c) => {
            let cfg: SolverConfig = config.base;
            let report = validate::validate(&cfg)?;
            artifacts::create_dir(&c.out)?;
            artifacts::write_json(&c.out.join("validate_report.json"), &report)?;
            for check in &report.checks {
                println!(
                    "{:<24} {} residual {:.3e} (threshold {:.1e})",
                    check.name,
                    if check.passed { "PASS" } else { "FAIL" },
                    check.residual,
                    check.threshold
                );
            }
            Ok(if report.passed { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

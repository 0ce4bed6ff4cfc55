use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use harmstrat_cli::{build_config, run, CliError, Command};

#[derive(Parser)]
#[command(
    name = "harmstrat",
    version,
    about = "Quantitative stratification of sampled sphere-valued maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `key=value` override, applied after the file; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Strata, energy-induction covering and Minkowski estimates.
    Analyze,
    /// β² profile of a measure file.
    Beta,
    /// Dini and packing checks on a covering or measure file.
    Reifenberg,
    /// Invariant suites.
    Verify,
    /// Strata covering at a single scale.
    Cover,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::Analyze => Command::Analyze,
        Sub::Beta => Command::Beta,
        Sub::Reifenberg => Command::Reifenberg,
        Sub::Verify => Command::Verify,
        Sub::Cover => Command::Cover,
    };
    let result = build_config(cli.config.as_deref(), &cli.set).and_then(|cfg| run(command, &cfg, &cli.out));
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "{}",
                    CliError::assertion("one or more checks failed; see the report").diagnostic()
                );
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.status as u8)
        }
    }
}

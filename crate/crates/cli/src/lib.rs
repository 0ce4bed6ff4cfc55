//! Configuration, pipelines and invariant suites behind the `harmstrat` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod verify;

use std::path::Path;

pub use commands::{run_analyze, run_beta, run_cover, run_reifenberg, Outcome};
pub use config::{RawConfig, RunConfig};
pub use error::CliError;
pub use verify::run_verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Beta,
    Reifenberg,
    Verify,
    Cover,
}

/// Builds the effective configuration: defaults, then the file, then overrides.
pub fn build_config(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut raw = RawConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        raw.apply_file(&text)?;
    }
    for o in overrides {
        raw.apply_override(o)?;
    }
    RunConfig::from_raw(raw)
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    match command {
        Command::Analyze => run_analyze(cfg, out),
        Command::Beta => run_beta(cfg, out),
        Command::Reifenberg => run_reifenberg(cfg, out),
        Command::Verify => run_verify(cfg, out),
        Command::Cover => run_cover(cfg, out),
    }
}

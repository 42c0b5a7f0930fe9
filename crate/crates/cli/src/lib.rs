//! Library surface of the spadsim CLI: configuration, experiment
//! orchestration, and the per-subcommand entry points. The binary in
//! `main.rs` is a thin argument-parsing wrapper so integration tests can
//! drive commands in process.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod policy_config;
pub mod provenance;

use config::Config;
use error::CliError;
use std::path::Path;

/// Dispatch a subcommand by name.
pub fn run_command(
    command: &str,
    config: &Config,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    match command {
        "curves" => commands::curves::run(config, seed, out_dir),
        "static" => commands::static_cmd::run(config, seed, out_dir),
        "edge" => commands::edge_cmd::run(config, seed, out_dir),
        "bracket" => commands::bracket_cmd::run(config, seed, out_dir),
        "allocate" => commands::allocate::run(config, seed, out_dir),
        "sweep" => commands::sweep_cmd::run(config, seed, out_dir),
        "corpus" => commands::corpus_cmd::run(config, seed, out_dir),
        other => Err(CliError::config(format!("unknown command '{other}'"))),
    }
}

use clap::{Parser, Subcommand};
use spadsim_cli::config::Config;
use spadsim_cli::error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Single-photon imaging simulator with pixel-inhibition policies.
#[derive(Parser)]
#[command(name = "spadsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run configuration file (sectioned key = value text).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; identical seeds reproduce byte-identical outputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for independent runs (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Emit energy-aware metric curves over an exposure grid.
    Curves(CommonArgs),
    /// Static-imaging policy experiment with equal-quality deltas.
    Static(CommonArgs),
    /// Edge-detection policy experiment (boundary F vs detections).
    Edge(CommonArgs),
    /// Saturation look-ahead bracket analysis and MLE LUT export.
    Bracket(CommonArgs),
    /// Oracle measurement allocations and noise-image comparison.
    Allocate(CommonArgs),
    /// Eta x tau_h tuning grid in the run-report schema.
    Sweep(CommonArgs),
    /// Materialize the bundled synthetic scenes and edge maps.
    Corpus(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Curves(_) => "curves",
            Command::Static(_) => "static",
            Command::Edge(_) => "edge",
            Command::Bracket(_) => "bracket",
            Command::Allocate(_) => "allocate",
            Command::Sweep(_) => "sweep",
            Command::Corpus(_) => "corpus",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Curves(a)
            | Command::Static(a)
            | Command::Edge(a)
            | Command::Bracket(a)
            | Command::Allocate(a)
            | Command::Sweep(a)
            | Command::Corpus(a) => a,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = cli.command.args();
    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    let config = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::empty(),
    };
    spadsim_cli::run_command(cli.command.name(), &config, args.seed, &args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spadsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use henderson::cli::{run, Command, Options};

/// Cluster-expansion forward model and relative-entropy inversion of pair
/// correlation functions in one dimension.
#[derive(Parser)]
#[command(name = "henderson", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Density, pressure and pair correlation at one state point.
    Forward,
    /// Recover the pair potential behind a target pair correlation.
    Invert,
    /// Run the property suite and report PASS/FAIL per check.
    Check,
    /// Compare the expansion with direct quadrature in a finite box.
    Oracle,
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat `key = value` file).
    #[arg(long, global = true, default_value = "henderson.conf")]
    config: PathBuf,
    /// Directory for output files; overrides `output_dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for probe vectors; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[arg(long, global = true, hide = true)]
    corrupt_jacobian: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let cmd = match cli.command {
        Cmd::Forward => Command::Forward,
        Cmd::Invert => Command::Invert,
        Cmd::Check => Command::Check,
        Cmd::Oracle => Command::Oracle,
    };
    let opts = Options {
        config: cli.common.config,
        output: cli.common.output,
        seed: cli.common.seed,
        corrupt_jacobian: cli.common.corrupt_jacobian,
    };
    ExitCode::from(run(cmd, &opts) as u8)
}

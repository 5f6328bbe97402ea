use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use superrad::error::Error;
use superrad::scenario::{self, ScenarioConfig};

#[derive(Parser)]
#[command(name = "superrad", version, about = "Collective decay of multilevel atoms in a two-mode cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every grid cell and write one time series per cell.
    Run(Args),
    /// Write a resumable long-format summary over the grid.
    Sweep(Args),
    /// Export eigen decay rates and dark-state census.
    Spectrum(Args),
    /// Export the superradiance potential and its stationary points.
    Potential(Args),
    /// Check the configuration and the size of exact runs.
    Validate(Args),
}

#[derive(clap::Args)]
struct Args {
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Parse(_) => 2,
        Error::Resource { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, cmd) = match &cli.command {
        Command::Run(a) => (a, "run"),
        Command::Sweep(a) => (a, "sweep"),
        Command::Spectrum(a) => (a, "spectrum"),
        Command::Potential(a) => (a, "potential"),
        Command::Validate(a) => (a, "validate"),
    };
    let out = args.out_dir.as_deref();
    let result = ScenarioConfig::load(&args.config).and_then(|cfg| match cmd {
        "run" => scenario::run(&cfg, out).map(Some),
        "sweep" => scenario::sweep(&cfg, out).map(Some),
        "spectrum" => scenario::spectrum(&cfg, out).map(Some),
        "potential" => scenario::potential(&cfg, out).map(Some),
        _ => scenario::check(&cfg).map(|_| None),
    });
    match result {
        Ok(Some(m)) => {
            for f in &m.files {
                println!("{f}");
            }
            let failed = m.cells.iter().filter(|c| c.status.starts_with("failed")).count();
            if failed > 0 {
                eprintln!("{failed} cell(s) failed; see the manifest");
            }
            ExitCode::SUCCESS
        }
        Ok(None) => {
            println!("{}: ok", args.config.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spectral_opt::commands::{self, thread_pool};
use spectral_opt::error::EXIT_USAGE;
use spectral_opt::{Config, Result};

#[derive(Parser, Debug)]
#[command(
    name = "spectral-opt",
    version,
    about = "Step-size and convergence experiments for SGD and Muon"
)]
struct Cli {
    /// TOML configuration file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the numerical checks of the step-size and convergence theory.
    Verify,
    /// Sweep learning rates for SGD and Muon on the toy network.
    LrSweep,
    /// Compare convergence traces of SGD and Muon.
    Converge,
    /// Print the spectral summary of a gradient matrix.
    Spectrum {
        /// Matrix file (`rows cols` header, then entries).
        matrix: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out = cli
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    commands::ensure_dir(&out)?;
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Verify => commands::verify(&cfg, &out),
        Command::LrSweep => commands::lr_sweep(&cfg, &out),
        Command::Converge => commands::converge(&cfg, &out),
        Command::Spectrum { matrix } => commands::spectrum(&cfg, matrix, &out),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

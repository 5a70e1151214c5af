use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use eitrecon::cli::{execute, exit_code, Command, EXIT_INVALID};
use eitrecon::config::RunConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Validate,
    Simulate,
    Reconstruct,
    Msweep,
}

/// Pixelwise conductivity reconstruction from finitely many Neumann-to-Dirichlet
/// measurements by monotonicity tests.
#[derive(Debug, Parser)]
#[command(name = "eitrecon", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// `key=value`, applied after the file; may be repeated.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn init_threads() -> Result<(), String> {
    let n = match std::env::var("EITRECON_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("EITRECON_THREADS must be a nonnegative integer, got '{v}'"))?,
        Err(_) => 0,
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = init_threads() {
        eprintln!("eitrecon: {e}");
        return ExitCode::from(EXIT_INVALID as u8);
    }
    let command = match args.command {
        Cmd::Validate => Command::Validate,
        Cmd::Simulate => Command::Simulate,
        Cmd::Reconstruct => Command::Reconstruct,
        Cmd::Msweep => Command::Msweep,
    };
    let result = RunConfig::load(&args.config, &args.overrides).and_then(|c| execute(command, &c));
    match result {
        Ok(report) => {
            print!("{}", report.stdout);
            ExitCode::from(report.code as u8)
        }
        Err(e) => {
            eprintln!("eitrecon: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hydroelastic::config::{run, Command, RunConfig};

/// Periodic hydroelastic travelling waves by constrained variational ascent.
#[derive(Debug, Parser)]
#[command(name = "hydroelastic", version)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created when missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Dotted-path override, e.g. `physics.c2=5` or `numerics.N=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, value_enum, value_name = "NAME")]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rc = RunConfig { command: cli.command, config_path: cli.config, output_dir: cli.out, overrides: cli.set };
    match run(&rc) {
        Ok(outcome) => {
            if outcome.code() != 0 {
                eprintln!("hydroelastic: ascent did not converge; results written anyway");
            }
            ExitCode::from(outcome.code() as u8)
        }
        Err(e) => {
            eprintln!("hydroelastic: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nsentropy::io::{dispatch, exit_code, failure_json, parse_config, Subcommand};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Run,
    SweepEps,
    SweepDelta,
    Diagnose,
    Bridge,
    Mms,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Subcommand {
        match c {
            Command::Run => Subcommand::Run,
            Command::SweepEps => Subcommand::SweepEps,
            Command::SweepDelta => Subcommand::SweepDelta,
            Command::Diagnose => Subcommand::Diagnose,
            Command::Bridge => Subcommand::Bridge,
            Command::Mms => Subcommand::Mms,
        }
    }
}

/// Pseudo-spectral Navier-Stokes simulator with transported entropy and its verification harness.
#[derive(Debug, Parser)]
#[command(name = "nsentropy", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// INI configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn threads() -> Option<usize> {
    std::env::var("NSENTROPY_THREADS").ok()?.parse().ok().filter(|&n| n > 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = threads() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global thread pool is configured once");
    }
    let outcome = std::fs::read_to_string(&cli.config)
        .map_err(nsentropy::Error::from)
        .and_then(|text| parse_config(&text))
        .and_then(|mut cfg| {
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            dispatch(cli.command.into(), &cfg, &cli.out)
        });
    let code = exit_code(&outcome);
    if code == 0 {
        println!("{}", failure_json(&outcome));
    } else {
        eprintln!("{}", failure_json(&outcome));
    }
    ExitCode::from(code as u8)
}

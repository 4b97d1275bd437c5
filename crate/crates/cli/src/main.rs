use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pohozaev_cli::{parse_config, run};

/// Normalized solutions of fractional Schrödinger equations, driven by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "pohozaev-flow", version)]
struct Args {
    /// Run configuration.
    config: PathBuf,
    /// Record per-iteration traces to trace.csv.
    #[arg(long)]
    trace: bool,
    /// Concurrent solves in the scan modes.
    #[arg(long, value_name = "K")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if args.trace {
        cfg.output.trace = true;
    }
    if let Some(k) = args.workers {
        cfg.solver.workers = k;
    }
    match run(&cfg) {
        Ok(status) => {
            eprintln!("{:?}; outputs in {}", status, cfg.output_dir().display());
            ExitCode::from(status.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

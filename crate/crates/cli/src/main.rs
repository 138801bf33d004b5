use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

mod config;
mod error;
mod report;
mod run;

use config::{Command, RunConfig};
use error::CliError;

/// Shape derivatives of constrained quadratic problems, checked against finite differences.
#[derive(Debug, Parser)]
#[command(name = "shapederiv", version)]
struct Args {
    /// qp-demo | stokes-solve | shape-derivative | fd-verify | corollary3 | convergence
    command: String,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for summary.txt, report.kv and CSV tables.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

fn execute(args: &Args) -> Result<Vec<String>, CliError> {
    let command: Command = args.command.parse()?;
    let config = RunConfig::load(&args.config)?.resolve(command)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let output = match (&args.output, &config.output) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => base.join(dir),
        (None, None) => PathBuf::from("."),
    };
    let ctx = run::Context { config: &config, base, verbose: args.verbose };
    let report = run::run(command, &ctx)?;
    report.write(&output, &config, command.as_str())?;
    if args.verbose {
        eprint!("{}", report.render_summary(command.as_str()));
    }
    Ok(report.failed_checks)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(failed) if failed.is_empty() => ExitCode::SUCCESS,
        Ok(failed) => {
            for f in failed {
                eprintln!("error[check]: {f}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

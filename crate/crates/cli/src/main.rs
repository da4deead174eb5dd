//! `freeshift <command> --input job.json [--output report.json]`
//!
//! Exit codes: 0 ok, 1 i/o, 2 invalid input, 3 scale limit, 4 certification
//! failure, 5 resampling budget exhausted.

mod io;
mod jobs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::io::JobFile;
use crate::jobs::{run, Command, JobError, Options};

#[derive(Debug, Parser)]
#[command(name = "freeshift", version, about = "Width, breadth, LLL and sofic computations for subshifts")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    input: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = freeshift::covers::DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, default_value_t = freeshift::covers::DEFAULT_BREADTH_GRID)]
    grid: usize,
    #[arg(long, default_value_t = 1_000_000)]
    max_resamples: u64,
    #[arg(long)]
    window_radius: Option<usize>,
    #[arg(long, env = "FREESHIFT_THREADS")]
    threads: Option<usize>,
}

fn execute(args: &Args) -> Result<i32, JobError> {
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| JobError::Validation(e.to_string()))?;
    }
    let text = std::fs::read_to_string(&args.input).map_err(|e| JobError::Validation(format!("{}: {e}", args.input.display())))?;
    let job = JobFile::parse(&text)?;
    let opts = Options {
        seed: args.seed,
        tol: args.tol,
        grid: args.grid,
        max_resamples: args.max_resamples,
        window_radius: args.window_radius,
    };
    let outcome = run(args.command, &job, &opts)?;
    let mut text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    text.push('\n');
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|e| JobError::Io(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(outcome.status)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("freeshift: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

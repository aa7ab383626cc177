//! Front end for the `dirac-weyl` binary.
//!
//! `dirac-weyl <command> --config <path> [--out <path>] [--format csv|doc] [--verify]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error
//! (including a failed roundtrip comparison, reported after the output is written).

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

pub use config::{parse_config, Command, ConfigError, Format, JobConfig};
pub use run::{run, RunOutput};

use crate::exec::Execution;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "dirac-weyl", version, about = "Weyl functions and pseudo-exponential potentials of Dirac systems")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML job description.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (defaults to the config's output.path, then stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Report invariant residuals on stderr (gen-potential, inverse).
    #[arg(long)]
    pub verify: bool,
    /// Evaluate z points one at a time.
    #[arg(long)]
    pub sequential: bool,
}

/// Parses arguments, runs the job, and maps failures to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error[ConfigInvalid]: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config = match parse_config(&text).and_then(|c| c.validate_for(args.command).map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error[ConfigInvalid]: {}", e.0);
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let format = args
        .format
        .or(config.output.format)
        .unwrap_or_else(|| args.command.default_format());
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let output = match run(&config, args.command, format, args.verify, exec) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let target = args.out.or_else(|| config.output.path.as_ref().map(PathBuf::from));
    match target {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, &output.text) {
                eprintln!("error[Io]: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_NUMERICAL);
            }
        }
        None => print!("{}", output.text),
    }
    if let Some(report) = &output.verification {
        eprint!("{report}");
    }
    if output.comparison_failed {
        eprintln!("error[RoundtripMismatch]: deviation exceeded radius_bound for at least one z");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    ExitCode::SUCCESS
}

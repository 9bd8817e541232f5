//! Command-line front end: `compute`, `sweep` and `verify` over named or
//! file-backed qubit states, with deterministic CSV and JSON output.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use thiserror::Error;

pub use commands::{run_compute, run_sweep, run_verify, RunOutput};
pub use config::{Cli, Command, CommandConfig, CommandKind, Format, RunArgs};

pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid request: {0}")]
    Invalid(#[from] irrcorr::Error),
    #[error(
        "state is not full rank (smallest eigenvalue {0:.3e}); direct compute needs a full-rank \
         state, use `irrcorr sweep` to approach it by depolarizing continuation"
    )]
    NotFullRank(f64),
    #[error("computation failed: {0}")]
    Numerical(irrcorr::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::NotFullRank(_) => EXIT_INVALID,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_INTERNAL,
        }
    }
}

/// Resolve and run one command.
pub fn execute(kind: CommandKind, args: &RunArgs, max_qubits: usize) -> Result<(CommandConfig, RunOutput), CliError> {
    let config = CommandConfig::resolve(kind, args, max_qubits)?;
    let out = match kind {
        CommandKind::Compute => run_compute(&config)?,
        CommandKind::Sweep => run_sweep(&config)?,
        CommandKind::Verify => run_verify(&config)?,
    };
    Ok((config, out))
}

/// Whole program: parse `args`, run, write the report to `--out` or
/// `stdout`, and return the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_INVALID,
            };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let (kind, args) = match &cli.command {
        Command::Compute(a) => (CommandKind::Compute, a),
        Command::Sweep(a) => (CommandKind::Sweep, a),
        Command::Verify(a) => (CommandKind::Verify, a),
    };
    let result = config::max_qubits_from_env()
        .map_err(CliError::from)
        .and_then(|cap| execute(kind, args, cap));
    let (config, out) = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "irrcorr: {e}");
            return e.exit_code();
        }
    };
    for note in &out.notes {
        let _ = writeln!(stderr, "irrcorr: {note}");
    }
    let written = match &config.out {
        Some(path) => std::fs::write(path, &out.body),
        None => stdout.write_all(out.body.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "irrcorr: i/o error: {e}");
        return EXIT_INTERNAL;
    }
    out.exit_code
}

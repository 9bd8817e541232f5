use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use irrcorr::basis::DEFAULT_QUBIT_CAP;
use irrcorr::spectrum::SpectrumSettings;
use irrcorr::states::StateDescriptor;
use irrcorr::Error;

pub const MAX_QUBITS_ENV: &str = "IRRCORR_MAX_QUBITS";

#[derive(Debug, Parser)]
#[command(name = "irrcorr", version, about = "Irreducible multiparty correlations of qubit states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose the correlations of one full-rank state.
    Compute(RunArgs),
    /// Depolarizing continuation from I/d to the state, one CSV row per grid point.
    Sweep(RunArgs),
    /// Run certificates, sum rule, entropy identities and oracle cross-checks.
    Verify(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Structured,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// ghz:<n> | w:<n> | dicke:<n>:<k> | smolin | random:<n>:seed=<u64> | file:<path>, optional @p0=<float>
    #[arg(long)]
    pub state: String,
    /// Grid size N of the sweep (p0 = 1 - k/N).
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Max-norm moment residual accepted by the solver.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Correlation orders to report: `all` or a comma list such as `2,4`.
    #[arg(long, default_value = "all")]
    pub levels: String,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Append linear p0 -> 0 estimates to sweep output.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub extrapolate: bool,
    #[arg(long, default_value_t = irrcorr::solver::DEFAULT_THETA_CAP)]
    pub theta_cap: f64,
    #[arg(long, default_value_t = irrcorr::solver::DEFAULT_MAX_ITERATIONS)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Compute,
    Sweep,
    Verify,
}

/// Fully resolved run configuration; embedded verbatim in every output.
#[derive(Debug, Clone, Serialize)]
pub struct CommandConfig {
    pub version: &'static str,
    pub command: CommandKind,
    pub state: String,
    pub steps: usize,
    pub tolerance: f64,
    pub levels: Option<Vec<usize>>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    pub extrapolate: bool,
    pub theta_cap: f64,
    pub max_iterations: usize,
    pub max_qubits: usize,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub descriptor: StateDescriptor,
}

impl CommandConfig {
    pub fn resolve(command: CommandKind, args: &RunArgs, max_qubits: usize) -> Result<Self, Error> {
        let descriptor = parse_state_spec(&args.state, max_qubits)?;
        if args.steps == 0 {
            return Err(Error::OutOfRange("--steps must be positive".into()));
        }
        if args.tol.is_nan() || args.tol <= 0.0 {
            return Err(Error::OutOfRange(format!("--tol {}", args.tol)));
        }
        if args.theta_cap.is_nan() || args.theta_cap <= 0.0 {
            return Err(Error::OutOfRange(format!("--theta-cap {}", args.theta_cap)));
        }
        Ok(Self {
            version: env!("CARGO_PKG_VERSION"),
            command,
            state: descriptor.to_string(),
            steps: args.steps,
            tolerance: args.tol,
            levels: parse_levels(&args.levels)?,
            out: args.out.clone(),
            format: args.format,
            extrapolate: args.extrapolate,
            theta_cap: args.theta_cap,
            max_iterations: args.max_iter,
            max_qubits,
            seed: descriptor.seed(),
            descriptor,
        })
    }

    pub fn settings(&self) -> SpectrumSettings {
        SpectrumSettings {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            theta_cap: self.theta_cap,
            levels: self.levels.clone(),
            ..SpectrumSettings::default()
        }
    }

    /// `key=value` pairs for comment headers, in a fixed order.
    pub fn header_pairs(&self) -> Vec<(&'static str, String)> {
        let levels = match &self.levels {
            None => "all".to_string(),
            Some(l) => l.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
        };
        vec![
            ("version", self.version.to_string()),
            ("command", format!("{:?}", self.command).to_lowercase()),
            ("state", self.state.clone()),
            ("steps", self.steps.to_string()),
            ("tol", format!("{:e}", self.tolerance)),
            ("levels", levels),
            ("format", format!("{:?}", self.format).to_lowercase()),
            ("extrapolate", self.extrapolate.to_string()),
            ("theta_cap", self.theta_cap.to_string()),
            ("max_iter", self.max_iterations.to_string()),
            ("max_qubits", self.max_qubits.to_string()),
            (
                "seed",
                self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into()),
            ),
        ]
    }
}

/// Parse a state spec, rejecting party counts above `max_qubits`.
pub fn parse_state_spec(s: &str, max_qubits: usize) -> Result<StateDescriptor, Error> {
    StateDescriptor::parse_with_cap(s, max_qubits)
}

pub fn parse_levels(s: &str) -> Result<Option<Vec<usize>>, Error> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(None);
    }
    let levels = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::OutOfRange(format!("--levels entry {t:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if levels.is_empty() {
        return Err(Error::OutOfRange("--levels is empty".into()));
    }
    Ok(Some(levels))
}

/// Qubit cap from `IRRCORR_MAX_QUBITS`, default 5.
pub fn max_qubits_from_env() -> Result<usize, Error> {
    match std::env::var(MAX_QUBITS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| (1..=irrcorr::basis::MAX_SUPPORTED_QUBITS).contains(&n))
            .ok_or_else(|| Error::OutOfRange(format!("{MAX_QUBITS_ENV}={v}"))),
        Err(_) => Ok(DEFAULT_QUBIT_CAP),
    }
}

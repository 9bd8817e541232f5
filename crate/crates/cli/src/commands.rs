use std::fmt::Write as _;

use serde::Serialize;

use irrcorr::basis::moment_vector;
use irrcorr::matrix::{rel_entropy, vn_entropy, DensityMatrix};
use irrcorr::oracle::{diagonal_extraction, ipf_maxent, mutual_information_check};
use irrcorr::solver::{certify, Certificate};
use irrcorr::spectrum::{
    decompose, extrapolate_limit, product_of_marginals, sweep, CorrelationRecord, Decomposition,
    LimitEstimate, SweepSchedule,
};
use irrcorr::Error;

use crate::config::{CommandConfig, Format};
use crate::output::{comment_header, csv_columns, csv_row, fmt_sig, limit_comment};
use crate::CliError;

/// Tolerance for the sum rule, entropy identities and chain monotonicity.
pub const IDENTITY_CHECK_TOL: f64 = 1e-6;
/// Tolerance for the closed-form and classical oracle comparisons.
pub const ORACLE_TOL: f64 = 1e-7;
/// Largest off-diagonal magnitude allowed in projections of diagonal states.
pub const DIAGONAL_TOL: f64 = 1e-9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FLAGGED: i32 = 2;

/// Text produced by a command plus its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub exit_code: i32,
    pub body: String,
    /// Human-oriented notes for stderr; never part of `body`.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateStatus {
    Pass,
    Fail,
    /// The projection is numerically singular, so its logarithm (and with it
    /// the log residual) cannot be evaluated in double precision.
    Unavailable,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelCertificate {
    pub level: usize,
    pub status: CertificateStatus,
    pub certificate: Option<Certificate>,
    /// Why no certificate could be computed.
    pub error: Option<String>,
}

impl LevelCertificate {
    pub fn passed(&self) -> bool {
        self.status == CertificateStatus::Pass
    }

    fn label(&self) -> &'static str {
        match self.status {
            CertificateStatus::Pass => "pass",
            CertificateStatus::Fail => "fail",
            CertificateStatus::Unavailable => "unavailable",
        }
    }
}

fn certificates(rho: &DensityMatrix, dec: &Decomposition, tolerance: f64) -> Vec<LevelCertificate> {
    dec.projections
        .iter()
        .map(|(&level, proj)| {
            let cert = moment_vector(rho, level).and_then(|t| certify(&proj.state, &t, level, tolerance));
            match cert {
                Ok(c) => LevelCertificate {
                    level,
                    status: if c.passed { CertificateStatus::Pass } else { CertificateStatus::Fail },
                    certificate: Some(c),
                    error: None,
                },
                Err(e) => LevelCertificate {
                    level,
                    status: match e {
                        Error::NotFullRank(_) => CertificateStatus::Unavailable,
                        _ => CertificateStatus::Fail,
                    },
                    certificate: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ComputeReport<'a> {
    metadata: &'a CommandConfig,
    record: &'a CorrelationRecord,
    certificates: &'a [LevelCertificate],
}

/// Decompose one full-rank state.
pub fn run_compute(config: &CommandConfig) -> Result<RunOutput, CliError> {
    let rho = config.descriptor.build(config.max_qubits)?;
    if !rho.is_full_rank() {
        return Err(CliError::NotFullRank(rho.min_eigenvalue()));
    }
    let settings = config.settings();
    let dec = decompose(&rho, None, &settings).map_err(CliError::Numerical)?;
    let mut record = dec.record.clone();
    record.p0 = config.descriptor.p0.unwrap_or(0.0);
    let certs = certificates(&rho, &dec, config.tolerance);
    // Exit status follows convergence; a certificate that was evaluated and
    // failed also counts, one that could not be evaluated is only reported.
    let ok = record.all_converged() && certs.iter().all(|c| c.status != CertificateStatus::Fail);

    let body = match config.format {
        Format::Structured => json(&ComputeReport {
            metadata: config,
            record: &record,
            certificates: &certs,
        })?,
        Format::Csv => {
            let mut out = String::new();
            comment_header(config, &mut out);
            for c in &certs {
                let _ = writeln!(out, "# {}", certificate_line(c));
            }
            let _ = writeln!(out, "{}", csv_columns(record.n));
            let _ = writeln!(out, "{}", csv_row(&record));
            out
        }
    };
    Ok(RunOutput {
        exit_code: if ok { EXIT_OK } else { EXIT_FLAGGED },
        body,
        notes: Vec::new(),
    })
}

fn certificate_line(c: &LevelCertificate) -> String {
    format!(
        "certificate level={} {} {}",
        c.level,
        c.label(),
        certificate_detail(c)
    )
}

fn certificate_detail(c: &LevelCertificate) -> String {
    match (&c.certificate, &c.error) {
        (Some(cert), _) => format!(
            "log_residual={} moment_residual={} threshold={}",
            fmt_sig(cert.log_residual),
            fmt_sig(cert.moment_residual),
            fmt_sig(cert.threshold)
        ),
        (None, err) => {
            let err = err.as_deref().unwrap_or("unknown");
            match c.status {
                CertificateStatus::Unavailable => {
                    format!("projection numerically singular, log residual not computable: {err}")
                }
                _ => format!("error={err}"),
            }
        }
    }
}

#[derive(Serialize)]
struct SweepReport<'a> {
    metadata: &'a CommandConfig,
    records: &'a [CorrelationRecord],
    limits: Option<&'a [LimitEstimate]>,
    limit_error: Option<String>,
}

/// Depolarizing continuation towards the requested state.
pub fn run_sweep(config: &CommandConfig) -> Result<RunOutput, CliError> {
    let rho = config.descriptor.build(config.max_qubits)?;
    let schedule = SweepSchedule::new(config.steps)?;
    let result = sweep(&rho, schedule, &config.settings()).map_err(CliError::Numerical)?;
    let (limits, limit_error) = if config.extrapolate {
        match extrapolate_limit(&result) {
            Ok(l) => (Some(l), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };

    let body = match config.format {
        Format::Structured => json(&SweepReport {
            metadata: config,
            records: &result.records,
            limits: limits.as_deref(),
            limit_error: limit_error.clone(),
        })?,
        Format::Csv => {
            let mut out = String::new();
            comment_header(config, &mut out);
            let _ = writeln!(out, "{}", csv_columns(result.n));
            for r in &result.records {
                let _ = writeln!(out, "{}", csv_row(r));
            }
            for l in limits.iter().flatten() {
                let _ = writeln!(out, "{}", limit_comment(l));
            }
            if let Some(e) = &limit_error {
                let _ = writeln!(out, "# limit unavailable: {e}");
            }
            out
        }
    };
    let flagged = result.records.iter().filter(|r| !r.all_converged()).count();
    let notes = if flagged > 0 {
        vec![format!("{flagged} of {} grid points carry flags", result.records.len())]
    } else {
        Vec::new()
    };
    Ok(RunOutput {
        exit_code: EXIT_OK,
        body,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if passed { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: detail.into(),
        }
    }

    fn skip(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Skip,
            detail: detail.into(),
        }
    }

    fn within(name: &str, value: f64, tol: f64) -> Self {
        Self::new(name, value <= tol, format!("gap={} tol={}", fmt_sig(value), fmt_sig(tol)))
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    metadata: &'a CommandConfig,
    record: &'a CorrelationRecord,
    checks: &'a [Check],
}

/// Every property check for one state, in a fixed order.
pub fn verify_checks(
    rho: &DensityMatrix,
    dec: &Decomposition,
    tolerance: f64,
) -> Result<Vec<Check>, Error> {
    let record = &dec.record;
    let mut checks = Vec::new();

    for status in &record.levels {
        let name = format!("convergence level {}", status.level);
        let detail = format!(
            "iterations={} residual={} theta_max={}",
            status.iterations,
            fmt_sig(status.residual),
            fmt_sig(status.theta_norm)
        );
        if status.boundary {
            checks.push(Check::new(
                name,
                false,
                format!("{detail} boundary divergence: projection lies on the edge of the state space; use sweep"),
            ));
        } else {
            checks.push(Check::new(name, status.converged, detail));
        }
    }
    for c in certificates(rho, dec, tolerance) {
        let name = format!("certificate level {}", c.level);
        checks.push(Check::new(name, c.passed(), certificate_detail(&c)));
    }

    match record.sum_rule_gap {
        Some(gap) => checks.push(Check::within("sum rule", gap, IDENTITY_CHECK_TOL)),
        None => checks.push(Check::skip("sum rule", "not every order requested")),
    }
    checks.push(Check::within("entropy identity per order", record.identity_gap, IDENTITY_CHECK_TOL));
    let negative: Vec<String> = record
        .orders
        .iter()
        .filter_map(|(m, v)| v.filter(|x| !x.is_finite() || *x < 0.0).map(|x| format!("C_{m}={}", fmt_sig(x))))
        .collect();
    checks.push(Check::new(
        "orders finite and nonnegative",
        negative.is_empty(),
        if negative.is_empty() { "ok".to_string() } else { negative.join(" ") },
    ));

    let product = product_of_marginals(rho)?;
    let spectral_total = rel_entropy(rho, &product)?;
    checks.push(Check::within(
        "total correlation as relative entropy",
        (spectral_total - record.total_bits).abs(),
        IDENTITY_CHECK_TOL,
    ));

    let mut chain = vec![(1usize, vn_entropy(&product))];
    chain.extend(record.levels.iter().map(|l| (l.level, l.entropy_bits)));
    chain.push((record.n, record.entropy_bits));
    let worst_rise = chain
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    checks.push(Check::within("entropy chain non-increasing", worst_rise, IDENTITY_CHECK_TOL));

    if record.n == 2 {
        let mi = mutual_information_check(rho)?;
        let c2 = record.order(2).unwrap_or(f64::NAN);
        let gap = (mi - c2).abs();
        checks.push(Check::new(
            "two-party mutual information",
            gap <= ORACLE_TOL,
            format!("C_2={} I={} gap={}", fmt_sig(c2), fmt_sig(mi), fmt_sig(gap)),
        ));
    }

    match diagonal_extraction(rho) {
        Ok(p) => {
            for (&level, proj) in &dec.projections {
                let off = proj.state.off_diagonal_magnitude();
                let q = ipf_maxent(&p, level, 1e-12)?;
                let diag = diagonal_extraction(&proj.state).map(|d| d.max_abs_diff(&q));
                let (passed, detail) = match diag {
                    Ok(gap) => (
                        gap <= ORACLE_TOL && off <= DIAGONAL_TOL,
                        format!("max_diff={} off_diagonal={}", fmt_sig(gap), fmt_sig(off)),
                    ),
                    Err(e) => (false, e.to_string()),
                };
                checks.push(Check::new(format!("classical fit level {level}"), passed, detail));
            }
        }
        Err(Error::NotDiagonal(_)) => {
            checks.push(Check::skip("classical fit", "state is not diagonal"));
        }
        Err(e) => return Err(e),
    }
    Ok(checks)
}

/// Run every check; exit 0 iff none fails.
pub fn run_verify(config: &CommandConfig) -> Result<RunOutput, CliError> {
    let rho = config.descriptor.build(config.max_qubits)?;
    let dec = decompose(&rho, None, &config.settings()).map_err(CliError::Numerical)?;
    let mut record = dec.record.clone();
    record.p0 = config.descriptor.p0.unwrap_or(0.0);
    let checks = verify_checks(&rho, &dec, config.tolerance).map_err(CliError::Numerical)?;
    let failed = checks.iter().filter(|c| c.status == CheckStatus::Fail).count();

    let body = match config.format {
        Format::Structured => json(&VerifyReport {
            metadata: config,
            record: &record,
            checks: &checks,
        })?,
        Format::Csv => {
            let mut out = String::new();
            comment_header(config, &mut out);
            let _ = writeln!(out, "# {}", csv_columns(record.n));
            let _ = writeln!(out, "# {}", csv_row(&record));
            for c in &checks {
                let tag = match c.status {
                    CheckStatus::Pass => "PASS",
                    CheckStatus::Fail => "FAIL",
                    CheckStatus::Skip => "SKIP",
                };
                let _ = writeln!(out, "{tag} {}: {}", c.name, c.detail);
            }
            let _ = writeln!(
                out,
                "{} {} checks, {failed} failed",
                if failed == 0 { "PASS" } else { "FAIL" },
                checks.len()
            );
            out
        }
    };
    Ok(RunOutput {
        exit_code: if failed == 0 { EXIT_OK } else { EXIT_FLAGGED },
        body,
        notes: Vec::new(),
    })
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

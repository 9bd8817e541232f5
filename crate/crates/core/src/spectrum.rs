//! Correlation decomposition `C_T = Σ_{m=2}^n C_m` for a single state, and the
//! depolarizing continuation sweep with warm starts.
//!
//! `ρ_1` is the product of single-party marginals, `ρ_2 … ρ_{n−1}` come from
//! [`solve_projection`], and `ρ_n = ρ`. Then `C_m = S(ρ_m‖ρ_{m−1})` and
//! `C_T = S(ρ‖ρ_1) = Σ_i S(ρ^{(i)}) − S(ρ)`.
//!
//! Relative entropies against a projection use the exact logarithm
//! `ln ρ_m = Σ θ_a O_a − ln Z`, so near-singular projections cost no precision.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use serde::Serialize;

use crate::basis::{moment_vector, pauli_moment};
use crate::error::{Error, Result};
use crate::matrix::{cross_log_nats, kron, partial_trace, vn_entropy_nats, DensityMatrix};
use crate::solver::{
    solve_projection, ProjectionProblem, ProjectionResult, SolveError, ThetaVector,
    DEFAULT_MAX_ITERATIONS, DEFAULT_NEWTON_MAX_DIM, DEFAULT_THETA_CAP, DEFAULT_TOLERANCE,
};
use crate::states::depolarize;

/// Correlations in `[-NEGATIVE_TOL, 0)` are reported as zero.
pub const NEGATIVE_TOL: f64 = 1e-6;
/// Allowed gap between `C_m` and `S(ρ_{m−1}) − S(ρ_m)`.
pub const IDENTITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub theta_cap: f64,
    pub newton_max_dim: usize,
    /// Correlation orders to report (`2..=n`); `None` means all.
    pub levels: Option<Vec<usize>>,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            theta_cap: DEFAULT_THETA_CAP,
            newton_max_dim: DEFAULT_NEWTON_MAX_DIM,
            levels: None,
        }
    }
}

impl SpectrumSettings {
    /// Requested correlation orders for an `n`-party state, ascending.
    pub fn orders(&self, n: usize) -> Result<Vec<usize>> {
        match &self.levels {
            None => Ok((2..=n).collect()),
            Some(list) => {
                let mut out = list.clone();
                out.sort_unstable();
                out.dedup();
                if let Some(bad) = out.iter().find(|&&m| m < 2 || m > n) {
                    return Err(Error::OutOfRange(format!(
                        "correlation order {bad} outside 2..={n}"
                    )));
                }
                Ok(out)
            }
        }
    }

    /// Projection levels (strictly between 1 and n) the requested orders need.
    pub fn projection_levels(&self, n: usize) -> Result<Vec<usize>> {
        let mut levels: Vec<usize> = self
            .orders(n)?
            .into_iter()
            .flat_map(|m| [m - 1, m])
            .filter(|&l| l >= 2 && l < n)
            .collect();
        levels.sort_unstable();
        levels.dedup();
        Ok(levels)
    }

    fn problem(&self, rho: &DensityMatrix, level: usize) -> Result<ProjectionProblem> {
        Ok(ProjectionProblem::new(moment_vector(rho, level)?)?
            .with_tolerance(self.tolerance)?
            .with_theta_cap(self.theta_cap)?
            .with_max_iterations(self.max_iterations)
            .with_newton_max_dim(self.newton_max_dim))
    }
}

/// Outcome of one projection level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStatus {
    pub level: usize,
    pub converged: bool,
    pub boundary: bool,
    pub iterations: usize,
    pub residual: f64,
    pub theta_norm: f64,
    pub entropy_bits: f64,
}

/// Decomposition of one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRecord {
    pub k: usize,
    pub p0: f64,
    pub n: usize,
    pub entropy_bits: f64,
    pub total_bits: f64,
    /// `C_m` for `m = 2..=n`; `None` for orders not requested.
    pub orders: BTreeMap<usize, Option<f64>>,
    /// Orders whose value depends on a flagged projection or failed a check.
    pub flagged_orders: Vec<usize>,
    pub max_residual: f64,
    pub iterations_total: usize,
    pub levels: Vec<LevelStatus>,
    /// Largest `|C_m − (S(ρ_{m−1}) − S(ρ_m))|` over reported orders.
    pub identity_gap: f64,
    /// `|C_T − Σ_m C_m|` when every order was computed.
    pub sum_rule_gap: Option<f64>,
}

impl CorrelationRecord {
    pub fn order(&self, m: usize) -> Option<f64> {
        self.orders.get(&m).copied().flatten()
    }

    pub fn order_ok(&self, m: usize) -> bool {
        self.order(m).is_some() && !self.flagged_orders.contains(&m)
    }

    /// Every projection converged and every check held.
    pub fn all_converged(&self) -> bool {
        self.flagged_orders.is_empty() && self.levels.iter().all(|l| l.converged)
    }

    /// Compact flag string: `ok`, or `;`-joined markers such as `boundary:3`.
    pub fn flag_string(&self) -> String {
        let mut flags: Vec<String> = Vec::new();
        for l in &self.levels {
            if l.boundary {
                flags.push(format!("boundary:{}", l.level));
            } else if !l.converged {
                flags.push(format!("maxiter:{}", l.level));
            }
        }
        for m in &self.flagged_orders {
            flags.push(format!("C{m}"));
        }
        if flags.is_empty() {
            "ok".into()
        } else {
            flags.join(";")
        }
    }
}

/// Warm-start coefficients per projection level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelThetas(pub BTreeMap<usize, ThetaVector>);

impl LevelThetas {
    pub fn get(&self, level: usize) -> Option<&ThetaVector> {
        self.0.get(&level)
    }
}

/// Tensor product of the single-party marginals.
pub fn product_of_marginals(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let marginals = single_marginals(rho)?;
    let m = marginals
        .iter()
        .skip(1)
        .fold(marginals[0].matrix().clone(), |acc, r| kron(&acc, r.matrix()));
    Ok(DensityMatrix::from_trusted(rho.shape(), m))
}

fn single_marginals(rho: &DensityMatrix) -> Result<Vec<DensityMatrix>> {
    (0..rho.n()).map(|p| partial_trace(rho, &[p])).collect()
}

/// A projection in the chain, with what relative entropies need from it.
enum Projection {
    Marginals(Vec<DensityMatrix>),
    Gibbs(Box<ProjectionResult>),
}

impl Projection {
    /// `Tr(σ ln ρ_m)` in nats.
    fn cross_log(&self, sigma: &DensityMatrix) -> Result<f64> {
        match self {
            Projection::Marginals(marginals) => {
                let mut acc = 0.0;
                for (p, marginal) in marginals.iter().enumerate() {
                    let reduced = partial_trace(sigma, &[p])?;
                    acc += cross_log_nats(reduced.matrix(), marginal.matrix())?;
                }
                Ok(acc)
            }
            Projection::Gibbs(r) => {
                let mut acc = -r.ln_z;
                for (a, theta) in r.theta.iter() {
                    acc += theta * pauli_moment(sigma, a)?;
                }
                Ok(acc)
            }
        }
    }
}

/// Decompose the correlations of `rho`.
///
/// `warm` supplies per-level initial coefficients (zeros otherwise). Solver
/// failures never abort: they mark the level and the orders depending on it.
pub fn correlation_levels(
    rho: &DensityMatrix,
    warm: Option<&LevelThetas>,
    settings: &SpectrumSettings,
) -> Result<(CorrelationRecord, LevelThetas)> {
    let dec = decompose(rho, warm, settings)?;
    Ok((dec.record, dec.thetas))
}

/// Full output of [`decompose`]: the record plus every solved projection.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub record: CorrelationRecord,
    pub thetas: LevelThetas,
    /// Projections `ρ_m` for the solved levels (best iterate when flagged).
    pub projections: BTreeMap<usize, ProjectionResult>,
}

/// [`correlation_levels`] keeping the projected states.
pub fn decompose(
    rho: &DensityMatrix,
    warm: Option<&LevelThetas>,
    settings: &SpectrumSettings,
) -> Result<Decomposition> {
    let n = rho.n();
    if n < 2 {
        return Err(Error::PartyCount { n, max: crate::basis::MAX_SUPPORTED_QUBITS });
    }
    let orders = settings.orders(n)?;
    let marginals = single_marginals(rho)?;
    let marginal_entropy: f64 = marginals.iter().map(vn_entropy_nats).sum();
    let entropy = vn_entropy_nats(rho);

    let mut chain: BTreeMap<usize, Projection> = BTreeMap::new();
    let mut entropies: BTreeMap<usize, f64> = BTreeMap::new();
    chain.insert(1, Projection::Marginals(marginals));
    entropies.insert(1, marginal_entropy);
    entropies.insert(n, entropy);

    let mut statuses = Vec::new();
    let mut thetas = LevelThetas::default();
    let mut bad_levels = Vec::new();
    for level in settings.projection_levels(n)? {
        let problem = settings.problem(rho, level)?;
        let init = warm
            .and_then(|w| w.get(level))
            .filter(|t| t.index_set() == problem.index_set())
            .cloned()
            .unwrap_or_else(|| ThetaVector::zeros(problem.index_set().clone()));
        let result = match solve_projection(&problem, &init) {
            Ok(r) => r,
            Err(SolveError::Numerical(e)) => return Err(e),
            Err(e) => e.into_best().expect("iterate attached"),
        };
        let report = &result.report;
        if !report.converged {
            bad_levels.push(level);
        }
        statuses.push(LevelStatus {
            level,
            converged: report.converged,
            boundary: report.boundary_flag,
            iterations: report.iterations,
            residual: report.final_residual,
            theta_norm: report.theta_norm,
            entropy_bits: result.entropy_bits(),
        });
        entropies.insert(level, result.gibbs.entropy_nats());
        if report.converged {
            thetas.0.insert(level, result.theta.clone());
        }
        chain.insert(level, Projection::Gibbs(Box::new(result)));
    }

    let total = ((marginal_entropy - entropy) / LN_2).max(0.0);
    let mut values = BTreeMap::new();
    let mut flagged = Vec::new();
    let mut identity_gap = 0.0f64;
    for m in 2..=n {
        if !orders.contains(&m) {
            values.insert(m, None);
            continue;
        }
        let lower = chain.get(&(m - 1)).expect("lower projection solved");
        let (upper_state, upper_entropy) = if m == n {
            (rho, entropy)
        } else {
            match chain.get(&m) {
                Some(Projection::Gibbs(r)) => (&r.state, r.gibbs.entropy_nats()),
                _ => unreachable!("projection levels cover requested orders"),
            }
        };
        let raw = match lower.cross_log(upper_state) {
            Ok(x) => (-upper_entropy - x) / LN_2,
            Err(Error::SupportViolation(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let by_entropy = (entropies[&(m - 1)] - upper_entropy) / LN_2;
        let gap = (raw - by_entropy).abs();
        let mut flag = bad_levels.contains(&m) || bad_levels.contains(&(m - 1));
        if !raw.is_finite() || raw < -NEGATIVE_TOL || gap > IDENTITY_TOL {
            flag = true;
        }
        if gap.is_finite() {
            identity_gap = identity_gap.max(gap);
        }
        if flag {
            flagged.push(m);
        }
        values.insert(m, Some(if (-NEGATIVE_TOL..0.0).contains(&raw) { 0.0 } else { raw }));
    }
    let sum_rule_gap = if values.values().all(|v| v.is_some()) {
        Some((total - values.values().map(|v| v.unwrap()).sum::<f64>()).abs())
    } else {
        None
    };
    let projections = chain
        .into_iter()
        .filter_map(|(level, p)| match p {
            Projection::Gibbs(r) => Some((level, *r)),
            Projection::Marginals(_) => None,
        })
        .collect();
    let record = CorrelationRecord {
        k: 0,
        p0: 0.0,
        n,
        entropy_bits: entropy / LN_2,
        total_bits: total,
        orders: values,
        flagged_orders: flagged,
        max_residual: statuses.iter().map(|s| s.residual).fold(0.0, f64::max),
        iterations_total: statuses.iter().map(|s| s.iterations).sum(),
        levels: statuses,
        identity_gap,
        sum_rule_gap,
    };
    Ok(Decomposition {
        record,
        thetas,
        projections,
    })
}

/// Uniform grid `p₀(k) = 1 − k/N`, `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SweepSchedule {
    pub steps: usize,
}

impl SweepSchedule {
    pub const DEFAULT_STEPS: usize = 100;

    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::OutOfRange("sweep needs at least one step".into()));
        }
        Ok(Self { steps })
    }

    pub fn p0(&self, k: usize) -> f64 {
        (self.steps - k) as f64 / self.steps as f64
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..=self.steps).map(move |k| (k, self.p0(k)))
    }
}

impl Default for SweepSchedule {
    fn default() -> Self {
        Self {
            steps: Self::DEFAULT_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub n: usize,
    pub schedule: SweepSchedule,
    pub settings: SpectrumSettings,
    pub records: Vec<CorrelationRecord>,
}

/// Depolarizing continuation from `I/d` (`k = 0`) to `rho_target` (`k = N`),
/// warm-starting every level from the previous grid point.
pub fn sweep(
    rho_target: &DensityMatrix,
    schedule: SweepSchedule,
    settings: &SpectrumSettings,
) -> Result<SweepResult> {
    sweep_with(rho_target, schedule, settings, |_| {})
}

/// [`sweep`] with a callback after each record (progress reporting).
pub fn sweep_with(
    rho_target: &DensityMatrix,
    schedule: SweepSchedule,
    settings: &SpectrumSettings,
    mut on_record: impl FnMut(&CorrelationRecord),
) -> Result<SweepResult> {
    let mut warm = LevelThetas::default();
    let mut records = Vec::with_capacity(schedule.steps + 1);
    for (k, p0) in schedule.points() {
        let rho = depolarize(rho_target, p0)?;
        let (mut record, thetas) = correlation_levels(&rho, Some(&warm), settings)?;
        record.k = k;
        record.p0 = p0;
        // keep the last converged coefficients per level
        warm.0.extend(thetas.0);
        on_record(&record);
        records.push(record);
    }
    Ok(SweepResult {
        n: rho_target.n(),
        schedule,
        settings: settings.clone(),
        records,
    })
}

/// Linear estimate of one order at `p₀ = 0` from the two smallest-`p₀`
/// converged grid points, alongside the raw value at the smallest of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEstimate {
    /// Correlation order; `None` for the total correlation.
    pub order: Option<usize>,
    pub raw_p0: f64,
    pub raw_bits: f64,
    pub estimate_bits: f64,
}

fn linear_limit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let (pa, ca) = points[0];
    let (pb, cb) = points[1];
    let estimate = if pb == pa { ca } else { ca - pa * (cb - ca) / (pb - pa) };
    (pa, ca, estimate)
}

pub fn extrapolate_limit(result: &SweepResult) -> Result<Vec<LimitEstimate>> {
    let mut out = Vec::new();
    for m in 2..=result.n {
        if result.records.iter().all(|r| r.order(m).is_none()) {
            continue;
        }
        let points: Vec<(f64, f64)> = result
            .records
            .iter()
            .rev()
            .filter(|r| r.order_ok(m))
            .take(2)
            .map(|r| (r.p0, r.order(m).expect("ok implies value")))
            .collect();
        if points.len() < 2 {
            return Err(Error::InsufficientData(m));
        }
        let (raw_p0, raw_bits, estimate_bits) = linear_limit(&points);
        out.push(LimitEstimate {
            order: Some(m),
            raw_p0,
            raw_bits,
            estimate_bits,
        });
    }
    let totals: Vec<(f64, f64)> = result
        .records
        .iter()
        .rev()
        .take(2)
        .map(|r| (r.p0, r.total_bits))
        .collect();
    if totals.len() == 2 {
        let (raw_p0, raw_bits, estimate_bits) = linear_limit(&totals);
        out.push(LimitEstimate {
            order: None,
            raw_p0,
            raw_bits,
            estimate_bits,
        });
    }
    Ok(out)
}

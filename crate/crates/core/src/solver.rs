//! Maximum-entropy projection onto the exponential family of states whose
//! logarithm contains only Pauli terms of weight at most `m`.
//!
//! The projection `ρ_m = argmin_{σ ∈ B_m} S(ρ‖σ)` is found by minimizing the
//! convex dual
//!
//! ```text
//! F(θ) = ln Tr exp(Σ_a θ_a O_a) − Σ_a θ_a t_a,     1 ≤ wt(a) ≤ m
//! ```
//!
//! whose gradient is the moment mismatch `Tr(O_a σ(θ)) − t_a`. The absence of
//! higher-weight terms in `ln σ` holds by construction, so a zero gradient
//! is exactly the pair of conditions characterising `ρ_m`.
//!
//! The Hessian is the Kubo–Mori covariance of the basis operators, computed
//! exactly through the divided differences of `exp` on the spectrum of
//! `H = Σ θ_a O_a`.

use std::time::Duration;

use nalgebra::{DMatrix, DVector};

use crate::basis::{IndexSet, MomentVector, MultiIndex, PauliAction};
use crate::error::{Error, Result};
use crate::matrix::{gibbs_state, log_coefficients, DensityMatrix, GibbsState};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
pub const DEFAULT_THETA_CAP: f64 = 60.0;
/// Largest index set solved with Newton steps; larger sets use L-BFGS.
pub const DEFAULT_NEWTON_MAX_DIM: usize = 1024;

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const LEVENBERG_START: f64 = 1e-10;
const LBFGS_MEMORY: usize = 20;
/// L-BFGS iteration budget relative to `max_iterations`.
const LBFGS_BUDGET_FACTOR: usize = 20;

/// Targets and settings of one projection.
#[derive(Debug, Clone)]
pub struct ProjectionProblem {
    targets: MomentVector,
    actions: Vec<PauliAction>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub theta_cap: f64,
    pub newton_max_dim: usize,
}

impl ProjectionProblem {
    pub fn new(targets: MomentVector) -> Result<Self> {
        let n = targets.index_set().shape().n();
        let m = targets.level();
        if m == 0 || m >= n {
            return Err(Error::OutOfRange(format!(
                "projection level {m} must lie in 1..{n}"
            )));
        }
        let actions = targets.index_set().indices().iter().map(|a| a.action()).collect();
        Ok(Self {
            targets,
            actions,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            theta_cap: DEFAULT_THETA_CAP,
            newton_max_dim: DEFAULT_NEWTON_MAX_DIM,
        })
    }

    /// Targets read off `rho` at level `m`.
    pub fn from_state(rho: &DensityMatrix, m: usize) -> Result<Self> {
        Self::new(crate::basis::moment_vector(rho, m)?)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Error::OutOfRange(format!("tolerance {tolerance}")));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_theta_cap(mut self, cap: f64) -> Result<Self> {
        if cap.is_nan() || cap <= 0.0 {
            return Err(Error::OutOfRange(format!("theta cap {cap}")));
        }
        self.theta_cap = cap;
        Ok(self)
    }

    pub fn with_newton_max_dim(mut self, dim: usize) -> Self {
        self.newton_max_dim = dim;
        self
    }

    pub fn level(&self) -> usize {
        self.targets.level()
    }

    pub fn targets(&self) -> &MomentVector {
        &self.targets
    }

    pub fn index_set(&self) -> &IndexSet {
        self.targets.index_set()
    }

    pub fn dim(&self) -> usize {
        self.actions.len()
    }
}

/// Free coefficients of `ln σ` on the non-identity indices of weight `≤ m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    set: IndexSet,
    values: Vec<f64>,
}

impl ThetaVector {
    pub fn zeros(set: IndexSet) -> Self {
        let values = vec![0.0; set.len()];
        Self { set, values }
    }

    pub fn new(set: IndexSet, values: Vec<f64>) -> Result<Self> {
        if set.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: set.len(),
                got: values.len(),
            });
        }
        if let Some((a, _)) = set.indices().iter().zip(&values).find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(a.to_string()));
        }
        Ok(Self { set, values })
    }

    pub fn level(&self) -> usize {
        self.set.level()
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.set
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, a: &MultiIndex) -> Option<f64> {
        self.set.position(a).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.set.indices().iter().zip(self.values.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        inf_norm(&self.values)
    }

    /// Hamiltonian `Σ θ_a O_a`.
    pub fn hamiltonian(&self) -> Result<DMatrix<crate::basis::C64>> {
        crate::basis::synthesize(self.set.shape(), self.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    Newton,
    Lbfgs,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm moment mismatch at the returned iterate.
    pub final_residual: f64,
    pub theta_norm: f64,
    /// Set when `θ` exceeded the cap (projection heading for a rank-deficient limit).
    pub boundary_flag: bool,
    pub method: SolverMethod,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub state: DensityMatrix,
    pub theta: ThetaVector,
    pub ln_z: f64,
    pub report: SolverReport,
    pub gibbs: GibbsState,
}

impl ProjectionResult {
    pub fn entropy_bits(&self) -> f64 {
        self.gibbs.entropy_bits()
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolveError {
    #[error("residual {:e} above tolerance after {} iterations", .0.report.final_residual, .0.report.iterations)]
    MaxIterations(Box<ProjectionResult>),
    #[error("coefficients exceeded the cap (|θ|∞ = {:.3}); projection approaches a rank-deficient state", .0.report.theta_norm)]
    BoundaryDivergence(Box<ProjectionResult>),
    #[error(transparent)]
    Numerical(#[from] Error),
}

impl SolveError {
    /// Best iterate reached before giving up, when there is one.
    pub fn best(&self) -> Option<&ProjectionResult> {
        match self {
            SolveError::MaxIterations(r) | SolveError::BoundaryDivergence(r) => Some(r),
            SolveError::Numerical(_) => None,
        }
    }

    pub fn into_best(self) -> Option<ProjectionResult> {
        match self {
            SolveError::MaxIterations(r) | SolveError::BoundaryDivergence(r) => Some(*r),
            SolveError::Numerical(_) => None,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dual value and gradient at one point, with the Gibbs state behind them.
struct Evaluation {
    theta: Vec<f64>,
    gibbs: GibbsState,
    expectations: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

impl Evaluation {
    fn residual(&self) -> f64 {
        inf_norm(&self.grad)
    }
}

fn evaluate(problem: &ProjectionProblem, theta: Vec<f64>) -> Result<Evaluation> {
    let set = problem.index_set();
    let h = crate::basis::synthesize(set.shape(), set.indices().iter().zip(theta.iter().copied()))?;
    let gibbs = gibbs_state(&h)?;
    let rho = gibbs.state.matrix();
    let expectations: Vec<f64> = problem.actions.iter().map(|act| act.trace_with(rho).re).collect();
    let t = problem.targets.values();
    let value = gibbs.ln_z - dot(&theta, t);
    let grad = expectations.iter().zip(t).map(|(e, t)| e - t).collect();
    Ok(Evaluation {
        theta,
        gibbs,
        expectations,
        value,
        grad,
    })
}

fn check_theta(theta: &ThetaVector, problem: &ProjectionProblem) -> Result<()> {
    if theta.index_set() != problem.index_set() {
        return Err(Error::OutOfRange(format!(
            "theta at level {} does not match problem level {}",
            theta.level(),
            problem.level()
        )));
    }
    Ok(())
}

/// `F(θ)` and `∇F(θ) = Tr(O_a σ(θ)) − t_a`.
pub fn dual_objective_grad(theta: &ThetaVector, problem: &ProjectionProblem) -> Result<(f64, Vec<f64>)> {
    check_theta(theta, problem)?;
    let ev = evaluate(problem, theta.values().to_vec())?;
    Ok((ev.value, ev.grad))
}

/// Exact Hessian of `F` at `θ`.
pub fn hessian(theta: &ThetaVector, problem: &ProjectionProblem) -> Result<DMatrix<f64>> {
    check_theta(theta, problem)?;
    let ev = evaluate(problem, theta.values().to_vec())?;
    Ok(hessian_at(problem, &ev))
}

/// Divided differences of `exp` on the spectrum, normalized by `Z`:
/// `Φ_ij = (e^{λ_i} − e^{λ_j}) / ((λ_i − λ_j) Z)`, `Φ_ii = p_i`.
fn divided_differences(g: &GibbsState) -> DMatrix<f64> {
    let lam = &g.spectrum.eigenvalues;
    let p = &g.probabilities;
    let d = lam.len();
    DMatrix::from_fn(d, d, |i, j| {
        let (hi, lo) = if lam[i] >= lam[j] { (i, j) } else { (j, i) };
        let delta = lam[hi] - lam[lo];
        if delta <= 0.0 {
            p[hi]
        } else {
            p[hi] * (-(-delta).exp_m1()) / delta
        }
    })
}

fn hessian_at(problem: &ProjectionProblem, ev: &Evaluation) -> DMatrix<f64> {
    let u = &ev.gibbs.spectrum.eigenvectors;
    let u_adj = u.adjoint();
    let d = u.nrows();
    let phi = divided_differences(&ev.gibbs);
    let k = problem.dim();

    // Column b holds the upper triangle of U† O_b U weighted by sqrt(Φ) so that
    // Bᵀ B = Tr(O_a De^H[O_b]) / Z.
    let mut weights = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in i..d {
            if i == j {
                weights.push(phi[(i, i)].sqrt());
            } else {
                weights.push((2.0 * phi[(i, j)]).sqrt());
            }
        }
    }
    let mut b = DMatrix::<f64>::zeros(d * d, k);
    for (col, act) in problem.actions.iter().enumerate() {
        let rotated = &u_adj * act.left_multiply(u);
        let mut row = 0;
        let mut w = weights.iter();
        for i in 0..d {
            for j in i..d {
                let wij = *w.next().expect("weight per pair");
                let z = rotated[(i, j)];
                b[(row, col)] = wij * z.re;
                row += 1;
                if i != j {
                    b[(row, col)] = wij * z.im;
                    row += 1;
                }
            }
        }
    }
    let mut h = b.tr_mul(&b);
    let e = DVector::from_column_slice(&ev.expectations);
    h -= &e * e.transpose();
    // exact symmetry
    for i in 0..k {
        for j in 0..i {
            let s = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = s;
            h[(j, i)] = s;
        }
    }
    h
}

fn newton_direction(h: &DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let rhs = -DVector::from_column_slice(grad);
    let k = h.nrows();
    let mut mu = 0.0;
    loop {
        let mut damped = h.clone();
        if mu > 0.0 {
            for i in 0..k {
                damped[(i, i)] += mu;
            }
        }
        if let Some(chol) = damped.cholesky() {
            let step = chol.solve(&rhs);
            if step.iter().all(|x| x.is_finite()) {
                return step.as_slice().to_vec();
            }
        }
        mu = if mu == 0.0 { LEVENBERG_START } else { mu * 10.0 };
        if mu > 1e12 {
            return rhs.as_slice().to_vec();
        }
    }
}

/// Armijo backtracking along `dir`; falls back to accepting any step that
/// lowers the residual without raising `F` beyond rounding.
fn line_search(problem: &ProjectionProblem, current: &Evaluation, dir: &[f64]) -> Option<Evaluation> {
    let slope = dot(&current.grad, dir);
    if slope.is_nan() || slope >= 0.0 {
        return None;
    }
    let slack = 1e-14 * current.value.abs().max(1.0);
    let res0 = current.residual();
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> = current.theta.iter().zip(dir).map(|(t, p)| t + alpha * p).collect();
        if let Ok(ev) = evaluate(problem, trial) {
            let armijo = ev.value <= current.value + ARMIJO_C * alpha * slope;
            let flat = ev.value <= current.value + slack && ev.residual() < res0;
            if armijo || flat {
                return Some(ev);
            }
        }
        alpha *= BACKTRACK;
    }
    None
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed()
        }
        #[cfg(target_arch = "wasm32")]
        {
            Duration::ZERO
        }
    }
}

enum Outcome {
    Converged,
    Boundary,
    Stalled,
}

/// Solve for `ρ_m` starting from `theta_init` (zeros allowed).
pub fn solve_projection(
    problem: &ProjectionProblem,
    theta_init: &ThetaVector,
) -> std::result::Result<ProjectionResult, SolveError> {
    check_theta(theta_init, problem)?;
    let clock = Stopwatch::start();
    let method = if problem.dim() <= problem.newton_max_dim {
        SolverMethod::Newton
    } else {
        SolverMethod::Lbfgs
    };
    let mut current = evaluate(problem, theta_init.values().to_vec())?;
    let (outcome, iterations) = match method {
        SolverMethod::Newton => run_newton(problem, &mut current),
        SolverMethod::Lbfgs => run_lbfgs(problem, &mut current),
    };
    let theta_norm = inf_norm(&current.theta);
    let boundary = matches!(outcome, Outcome::Boundary);
    let converged = matches!(outcome, Outcome::Converged);
    let report = SolverReport {
        converged,
        iterations,
        final_residual: current.residual(),
        theta_norm,
        boundary_flag: boundary,
        method,
        wall_time: clock.elapsed(),
    };
    let result = ProjectionResult {
        state: current.gibbs.state.clone(),
        theta: ThetaVector {
            set: problem.index_set().clone(),
            values: current.theta,
        },
        ln_z: current.gibbs.ln_z,
        report,
        gibbs: current.gibbs,
    };
    match outcome {
        Outcome::Converged => Ok(result),
        Outcome::Boundary => Err(SolveError::BoundaryDivergence(Box::new(result))),
        Outcome::Stalled => Err(SolveError::MaxIterations(Box::new(result))),
    }
}

fn run_newton(problem: &ProjectionProblem, current: &mut Evaluation) -> (Outcome, usize) {
    for iter in 0..problem.max_iterations {
        if current.residual() <= problem.tolerance {
            return (Outcome::Converged, iter);
        }
        if inf_norm(&current.theta) > problem.theta_cap {
            return (Outcome::Boundary, iter);
        }
        let h = hessian_at(problem, current);
        let mut dir = newton_direction(&h, &current.grad);
        let next = line_search(problem, current, &dir).or_else(|| {
            // Newton direction unusable at rounding level; try steepest descent.
            dir = current.grad.iter().map(|g| -g).collect();
            line_search(problem, current, &dir)
        });
        match next {
            Some(ev) => *current = ev,
            None => return (Outcome::Stalled, iter),
        }
    }
    let done = if current.residual() <= problem.tolerance {
        Outcome::Converged
    } else if inf_norm(&current.theta) > problem.theta_cap {
        Outcome::Boundary
    } else {
        Outcome::Stalled
    };
    (done, problem.max_iterations)
}

fn run_lbfgs(problem: &ProjectionProblem, current: &mut Evaluation) -> (Outcome, usize) {
    let budget = problem.max_iterations.saturating_mul(LBFGS_BUDGET_FACTOR);
    let mut history: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    for iter in 0..budget {
        if current.residual() <= problem.tolerance {
            return (Outcome::Converged, iter);
        }
        if inf_norm(&current.theta) > problem.theta_cap {
            return (Outcome::Boundary, iter);
        }
        // two-loop recursion
        let mut q = current.grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or(1.0);
        q.iter_mut().for_each(|x| *x *= gamma);
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|x| -x).collect();
        let next = line_search(problem, current, &dir).or_else(|| {
            history.clear();
            dir = current.grad.iter().map(|g| -g).collect();
            line_search(problem, current, &dir)
        });
        let Some(ev) = next else {
            return (Outcome::Stalled, iter);
        };
        let s: Vec<f64> = ev.theta.iter().zip(&current.theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ev.grad.iter().zip(&current.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        *current = ev;
    }
    let done = if current.residual() <= problem.tolerance {
        Outcome::Converged
    } else {
        Outcome::Stalled
    };
    (done, budget)
}

/// Direct residuals of the two defining conditions of `ρ_m`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Certificate {
    /// Largest `|⟨O_a| ln ρ_m⟩|` over `wt(a) > m`.
    pub log_residual: f64,
    /// Largest `|Tr(O_a ρ_m) − Tr(O_a ρ)|` over `1 ≤ wt(a) ≤ m`.
    pub moment_residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Check a candidate `ρ_m` against targets of level `≥ m` with threshold
/// `10 · tolerance`.
pub fn certify(
    state: &DensityMatrix,
    targets: &MomentVector,
    m: usize,
    tolerance: f64,
) -> Result<Certificate> {
    if targets.level() < m {
        return Err(Error::OutOfRange(format!(
            "targets of level {} cannot certify level {m}",
            targets.level()
        )));
    }
    let coeffs = log_coefficients(state)?;
    let log_residual = coeffs
        .iter()
        .filter(|(a, _)| a.weight() > m)
        .fold(0.0f64, |acc, (_, v)| acc.max(v.abs()));
    let mut moment_residual = 0.0f64;
    for (a, t) in targets.iter().filter(|(a, _)| a.weight() <= m) {
        let got = crate::basis::pauli_moment(state, &a)?;
        moment_residual = moment_residual.max((got - t).abs());
    }
    let threshold = 10.0 * tolerance;
    Ok(Certificate {
        log_residual,
        moment_residual,
        threshold,
        passed: log_residual <= threshold && moment_residual <= threshold,
    })
}

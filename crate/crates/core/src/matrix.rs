//! Dense Hermitian matrix analysis: eigendecomposition, entropies, relative
//! entropy, partial traces, matrix logarithm coefficients and Gibbs states.
//!
//! Public entropies are in bits. Internals work in nats.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::basis::{MultiIndex, SystemShape, C64};
use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
/// Eigenvalues above `-PSD_TOL` are treated as numerical zeros.
pub const PSD_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as strictly positive.
pub const FULL_RANK_TOL: f64 = 1e-12;
/// Largest eigenvalue spread `gibbs_state` will exponentiate.
pub const MAX_EXP_SPREAD: f64 = 1400.0;

const EIG_RESIDUAL: f64 = 1e-12;

/// Hermitian, unit-trace, positive semidefinite `d × d` matrix on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    shape: SystemShape,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validate and wrap a matrix, using the default trace tolerance.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        Self::with_trace_tol(matrix, TRACE_TOL)
    }

    pub fn with_trace_tol(matrix: DMatrix<C64>, trace_tol: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare(matrix.nrows(), matrix.ncols()));
        }
        let shape = SystemShape::from_dim(matrix.nrows())?;
        let asym = hermitian_defect(&matrix);
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian(asym));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > trace_tol || !tr.re.is_finite() {
            return Err(Error::InvalidTrace(tr.re));
        }
        let matrix = hermitian_part(&matrix);
        let min = eig_hermitian(&matrix)?.eigenvalues[0];
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { shape, matrix })
    }

    /// Wrap a matrix already known to be a valid state (symmetrized on entry).
    pub(crate) fn from_trusted(shape: SystemShape, matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), shape.dim());
        Self {
            shape,
            matrix: hermitian_part(&matrix),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&p| C64::new(p, 0.0)),
        ));
        Self::new(m)
    }

    /// Projector onto a normalized pure state vector.
    pub fn from_pure(amplitudes: &[C64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::OutOfRange("zero state vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|a| a / norm),
        );
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(shape: SystemShape) -> Self {
        let d = shape.dim();
        Self {
            shape,
            matrix: DMatrix::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0)),
        }
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape.n()
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eig_hermitian(&self.matrix)
            .map(|s| s.eigenvalues)
            .unwrap_or_default()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::NAN)
    }

    pub fn is_full_rank(&self) -> bool {
        self.min_eigenvalue() >= FULL_RANK_TOL
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entrywise difference to another state.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest off-diagonal magnitude.
    pub fn off_diagonal_magnitude(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                if r != c {
                    worst = worst.max(self.matrix[(r, c)].norm());
                }
            }
        }
        worst
    }
}

fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues ascending with matching unitary eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    /// `U f(Λ) U†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let fj = f(lam);
            scaled.column_mut(j).scale_mut(fj);
        }
        scaled * u.adjoint()
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        self.apply(|x| x)
    }
}

pub fn eig_hermitian(m: &DMatrix<C64>) -> Result<SpectralDecomposition> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let asym = hermitian_defect(m);
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(asym));
    }
    let h = hermitian_part(m);
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenFailure(EIG_RESIDUAL))?;
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(h.nrows(), h.ncols());
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn entropy_nats_of(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

pub(crate) fn vn_entropy_nats(rho: &DensityMatrix) -> f64 {
    entropy_nats_of(&rho.eigenvalues())
}

/// Von Neumann entropy in bits.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    vn_entropy_nats(rho) / LN_2
}

/// `Tr(ρ ln σ)` in nats, restricted to the support of `σ`.
pub(crate) fn cross_log_nats(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> Result<f64> {
    let eig = eig_hermitian(sigma)?;
    let mut acc = 0.0;
    for (j, &s) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(j);
        let w = (v.adjoint() * rho * v)[(0, 0)].re;
        if s < FULL_RANK_TOL {
            if w > PSD_TOL {
                return Err(Error::SupportViolation(w));
            }
            continue;
        }
        acc += w * s.ln();
    }
    Ok(acc)
}

/// Quantum relative entropy `S(ρ‖σ) = Tr ρ(ln ρ − ln σ)` in bits.
pub fn rel_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let value = (-vn_entropy_nats(rho) - cross_log_nats(rho.matrix(), sigma.matrix())?) / LN_2;
    Ok(value.max(0.0))
}

/// Reduced state on `keep` (0-based parties, any order; result keeps ascending
/// party order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.n();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() || kept.len() != keep.len() || kept.iter().any(|&p| p >= n) {
        return Err(Error::InvalidParties(format!("{keep:?} for {n} parties")));
    }
    let traced: Vec<usize> = (0..n).filter(|p| !kept.contains(p)).collect();
    let bit = |p: usize| 1usize << (n - 1 - p);
    let spread = |value: usize, parties: &[usize]| -> usize {
        let k = parties.len();
        parties
            .iter()
            .enumerate()
            .filter(|(i, _)| value >> (k - 1 - i) & 1 == 1)
            .fold(0, |acc, (_, &p)| acc | bit(p))
    };
    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    let kept_bits: Vec<usize> = (0..dk).map(|i| spread(i, &kept)).collect();
    let traced_bits: Vec<usize> = (0..dt).map(|t| spread(t, &traced)).collect();
    let m = rho.matrix();
    let out = DMatrix::from_fn(dk, dk, |i, j| {
        traced_bits
            .iter()
            .map(|&t| m[(kept_bits[i] | t, kept_bits[j] | t)])
            .sum::<C64>()
    });
    let shape = SystemShape::new(kept.len())?;
    Ok(DensityMatrix::from_trusted(shape, out))
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Coefficients `⟨O_a| ln ρ⟩ = Tr(O_a ln ρ)/d` for every Pauli string, indexed
/// by code.
#[derive(Debug, Clone)]
pub struct PauliCoefficients {
    pub shape: SystemShape,
    pub values: Vec<f64>,
}

impl PauliCoefficients {
    pub fn get(&self, a: &MultiIndex) -> f64 {
        self.values[a.code()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        let shape = self.shape;
        self.values
            .iter()
            .enumerate()
            .map(move |(c, &v)| (MultiIndex::from_code(c, shape).expect("in range"), v))
    }
}

pub fn log_coefficients(rho: &DensityMatrix) -> Result<PauliCoefficients> {
    let eig = eig_hermitian(rho.matrix())?;
    let min = eig.eigenvalues[0];
    if min < FULL_RANK_TOL {
        return Err(Error::NotFullRank(min));
    }
    let log = eig.apply(f64::ln);
    let shape = rho.shape();
    let d = shape.dim() as f64;
    let values = (0..shape.num_strings())
        .map(|c| {
            let a = MultiIndex::from_code(c, shape).expect("in range");
            a.action().trace_with(&log).re / d
        })
        .collect();
    Ok(PauliCoefficients { shape, values })
}

/// Normalized exponential `e^H / Tr e^H` together with the spectral data of `H`.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub state: DensityMatrix,
    /// `ln Tr e^H`.
    pub ln_z: f64,
    /// Eigen-decomposition of `H` (ascending).
    pub spectrum: SpectralDecomposition,
    /// Eigenvalues of the state, aligned with `spectrum`.
    pub probabilities: Vec<f64>,
    /// Exact logarithms of `probabilities` (`λ_i − ln Z`).
    pub log_probabilities: Vec<f64>,
}

impl GibbsState {
    pub fn entropy_nats(&self) -> f64 {
        self.probabilities
            .iter()
            .zip(&self.log_probabilities)
            .map(|(p, lp)| -p * lp)
            .sum()
    }

    pub fn entropy_bits(&self) -> f64 {
        self.entropy_nats() / LN_2
    }
}

pub fn gibbs_state(h: &DMatrix<C64>) -> Result<GibbsState> {
    let shape = SystemShape::from_dim(h.nrows())?;
    let spectrum = eig_hermitian(h)?;
    let lo = spectrum.eigenvalues[0];
    let hi = *spectrum.eigenvalues.last().expect("non-empty");
    if !(hi - lo).is_finite() || hi - lo > MAX_EXP_SPREAD {
        return Err(Error::Overflow(hi - lo));
    }
    let weights: Vec<f64> = spectrum.eigenvalues.iter().map(|l| (l - hi).exp()).collect();
    let z_shifted: f64 = weights.iter().sum();
    let ln_z = hi + z_shifted.ln();
    let probabilities: Vec<f64> = weights.iter().map(|w| w / z_shifted).collect();
    let log_probabilities = spectrum.eigenvalues.iter().map(|l| l - ln_z).collect();
    let u = &spectrum.eigenvectors;
    let mut scaled = u.clone();
    for (j, &p) in probabilities.iter().enumerate() {
        scaled.column_mut(j).scale_mut(p);
    }
    let state = DensityMatrix::from_trusted(shape, scaled * u.adjoint());
    Ok(GibbsState {
        state,
        ln_z,
        spectrum,
        probabilities,
        log_probabilities,
    })
}

//! Independent cross-checks: classical iterative proportional fitting on
//! diagonal states, and the two-party mutual-information closed form.

use crate::basis::SystemShape;
use crate::error::{Error, Result};
use crate::matrix::{partial_trace, vn_entropy, DensityMatrix};

/// Weight of the uniform distribution mixed in before fitting.
pub const IPF_FLOOR: f64 = 1e-9;
pub const IPF_MAX_CYCLES: usize = 100_000;

/// Probability distribution over `n` bits, indexed like computational basis
/// states (party 1 is the most significant bit).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        let shape = SystemShape::new(n)?;
        if probs.len() != shape.dim() {
            return Err(Error::InvalidDistribution(format!(
                "{} entries for {n} bits",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution("negative or non-finite entry".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Self { n, probs })
    }

    /// Normalize arbitrary nonnegative weights.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total weight".into()));
        }
        Self::new(n, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let d = SystemShape::new(n)?.dim();
        Self::new(n, vec![1.0 / d as f64; d])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn entropy_bits(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    }

    /// Marginal on `parties` (0-based, ascending), indexed by the packed bits.
    pub fn marginal(&self, parties: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; 1 << parties.len()];
        for (x, p) in self.probs.iter().enumerate() {
            out[self.pack(x, parties)] += p;
        }
        out
    }

    fn pack(&self, x: usize, parties: &[usize]) -> usize {
        parties
            .iter()
            .fold(0, |acc, &p| (acc << 1) | ((x >> (self.n - 1 - p)) & 1))
    }

    pub fn max_abs_diff(&self, other: &JointDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn diagonal_embedding(p: &JointDistribution) -> Result<DensityMatrix> {
    DensityMatrix::from_real_diagonal(p.probs())
}

pub fn diagonal_extraction(rho: &DensityMatrix) -> Result<JointDistribution> {
    let off = rho.off_diagonal_magnitude();
    if off > 1e-10 {
        return Err(Error::NotDiagonal(off));
    }
    let probs: Vec<f64> = (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re.max(0.0)).collect();
    JointDistribution::from_weights(rho.n(), probs)
}

/// Subsets of `0..n` with exactly `size` elements, in lexicographic order.
fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

fn max_marginal_mismatch(q: &JointDistribution, targets: &[(Vec<usize>, Vec<f64>)]) -> f64 {
    targets
        .iter()
        .flat_map(|(parties, target)| {
            q.marginal(parties)
                .into_iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// Classical maximum-entropy distribution sharing every `≤ m`-bit marginal
/// with `p`, by cyclic rescaling.
pub fn ipf_maxent(p: &JointDistribution, m: usize, tol: f64) -> Result<JointDistribution> {
    let n = p.n();
    if m == 0 || m > n {
        return Err(Error::OutOfRange(format!("level {m} for {n} bits")));
    }
    let d = p.probs().len();
    let floored = JointDistribution::from_weights(
        n,
        p.probs()
            .iter()
            .map(|x| (1.0 - IPF_FLOOR) * x + IPF_FLOOR / d as f64)
            .collect(),
    )?;
    let fit_sets = subsets(n, m);
    let fit_targets: Vec<(Vec<usize>, Vec<f64>)> = fit_sets
        .iter()
        .map(|s| (s.clone(), floored.marginal(s)))
        .collect();
    let check_targets: Vec<(Vec<usize>, Vec<f64>)> = (1..=m)
        .flat_map(|size| subsets(n, size))
        .map(|s| {
            let t = floored.marginal(&s);
            (s, t)
        })
        .collect();
    let mut q = JointDistribution::uniform(n)?;
    for _ in 0..IPF_MAX_CYCLES {
        if max_marginal_mismatch(&q, &check_targets) <= tol {
            return Ok(q);
        }
        for (parties, target) in &fit_targets {
            let current = q.marginal(parties);
            for x in 0..d {
                let key = q.pack(x, parties);
                if current[key] > 0.0 {
                    q.probs[x] *= target[key] / current[key];
                }
            }
        }
    }
    Err(Error::NoConvergence(IPF_MAX_CYCLES))
}

/// `S(ρ_A) + S(ρ_B) − S(ρ_AB)` in bits for a two-qubit state.
pub fn mutual_information_check(rho: &DensityMatrix) -> Result<f64> {
    if rho.n() != 2 {
        return Err(Error::ShapeMismatch {
            expected: 4,
            got: rho.dim(),
        });
    }
    let a = partial_trace(rho, &[0])?;
    let b = partial_trace(rho, &[1])?;
    Ok(vn_entropy(&a) + vn_entropy(&b) - vn_entropy(rho))
}

//! Pauli-string operator basis.
//!
//! A string `O_a = O_{a_1} ⊗ … ⊗ O_{a_n}` with `a_i ∈ {I, X, Y, Z}` is labelled
//! by a [`MultiIndex`]. Party 1 is the leftmost tensor factor, the most
//! significant base-4 digit of the code, and the most significant bit of a
//! computational-basis index. Under `⟨A|B⟩ = Tr(A†B)/d` the unnormalized
//! strings are already orthonormal.
//!
//! Every Pauli string is a signed permutation matrix: `O_a |y⟩ = φ_a(y) |y ⊕ f_a⟩`
//! where `f_a` marks the X/Y factors and `φ_a(y) = i^{#Y} (-1)^{|y ∧ s_a|}` with
//! `s_a` marking the Y/Z factors. Moments and synthesis use this directly and
//! never form Kronecker products.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DensityMatrix;

pub type C64 = Complex<f64>;

/// Largest party count any constructor accepts.
pub const MAX_SUPPORTED_QUBITS: usize = 6;
/// Default cap used by front ends unless overridden.
pub const DEFAULT_QUBIT_CAP: usize = 5;

const PAULI_CHARS: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// Number of qubits and the resulting Hilbert dimension `d = 2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemShape {
    n: usize,
}

impl SystemShape {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_cap(n, MAX_SUPPORTED_QUBITS)
    }

    /// Like [`SystemShape::new`] but rejects `n > cap`.
    pub fn with_cap(n: usize, cap: usize) -> Result<Self> {
        let max = cap.min(MAX_SUPPORTED_QUBITS);
        if n == 0 || n > max {
            return Err(Error::PartyCount { n, max });
        }
        Ok(Self { n })
    }

    /// Recover the shape of a `d × d` matrix.
    pub fn from_dim(d: usize) -> Result<Self> {
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::ShapeMismatch { expected: 2, got: d });
        }
        Self::new(d.trailing_zeros() as usize)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Number of Pauli strings, `4^n`.
    pub fn num_strings(&self) -> usize {
        1 << (2 * self.n)
    }
}

/// Label of a Pauli string; digits `0 = I, 1 = X, 2 = Y, 3 = Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    // `code` first so the derived ordering is by code within one shape.
    code: usize,
    n: usize,
}

impl MultiIndex {
    pub fn encode(digits: &[u8], shape: SystemShape) -> Result<Self> {
        if digits.len() != shape.n() {
            return Err(Error::LengthMismatch {
                expected: shape.n(),
                got: digits.len(),
            });
        }
        let mut code = 0usize;
        for (position, &digit) in digits.iter().enumerate() {
            if digit > 3 {
                return Err(Error::DigitOutOfRange { digit, position });
            }
            code = code * 4 + digit as usize;
        }
        Ok(Self { code, n: shape.n() })
    }

    pub fn from_code(code: usize, shape: SystemShape) -> Result<Self> {
        if code >= shape.num_strings() {
            return Err(Error::OutOfRange(format!(
                "code {code} for {} qubits",
                shape.n()
            )));
        }
        Ok(Self { code, n: shape.n() })
    }

    pub fn identity(shape: SystemShape) -> Self {
        Self { code: 0, n: shape.n() }
    }

    /// Parse the `IXYZ` text form; its length fixes the party count.
    pub fn parse(s: &str) -> Result<Self> {
        let shape = SystemShape::new(s.chars().count())?;
        let digits = s
            .chars()
            .enumerate()
            .map(|(position, ch)| match ch.to_ascii_uppercase() {
                'I' => Ok(0),
                'X' => Ok(1),
                'Y' => Ok(2),
                'Z' => Ok(3),
                _ => Err(Error::InvalidPauliChar { ch, position }),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::encode(&digits, shape)
    }

    pub fn code(&self) -> usize {
        self.code
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Digit of party `i` (0-based, party 0 leftmost).
    pub fn digit(&self, i: usize) -> u8 {
        ((self.code >> (2 * (self.n - 1 - i))) & 3) as u8
    }

    pub fn digits(&self) -> Vec<u8> {
        (0..self.n).map(|i| self.digit(i)).collect()
    }

    /// Number of non-identity factors, `n − N₀(a)`.
    pub fn weight(&self) -> usize {
        (0..self.n).filter(|&i| self.digit(i) != 0).count()
    }

    /// Parties (0-based) on which the string acts non-trivially.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.digit(i) != 0).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.code == 0
    }

    /// Apply a permutation of parties: party `i` of the result carries the
    /// factor that party `perm[i]` carries here.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let code = perm
            .iter()
            .fold(0usize, |acc, &src| acc * 4 + self.digit(src) as usize);
        Self { code, n: self.n }
    }

    pub fn action(&self) -> PauliAction {
        let mut flip = 0usize;
        let mut sign = 0usize;
        let mut y_count = 0u32;
        for i in 0..self.n {
            let bit = 1usize << (self.n - 1 - i);
            match self.digit(i) {
                1 => flip |= bit,
                2 => {
                    flip |= bit;
                    sign |= bit;
                    y_count += 1;
                }
                3 => sign |= bit,
                _ => {}
            }
        }
        PauliAction {
            flip,
            sign,
            global: i_power(y_count),
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            write!(f, "{}", PAULI_CHARS[self.digit(i) as usize])?;
        }
        Ok(())
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn i_power(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Signed-permutation form of a Pauli string.
#[derive(Debug, Clone, Copy)]
pub struct PauliAction {
    pub flip: usize,
    pub sign: usize,
    pub global: C64,
}

impl PauliAction {
    /// `φ(y)` such that `O |y⟩ = φ(y) |y ⊕ flip⟩`.
    #[inline]
    pub fn phase(&self, y: usize) -> C64 {
        if (y & self.sign).count_ones() % 2 == 1 {
            -self.global
        } else {
            self.global
        }
    }

    /// `Tr(O M)` for an arbitrary square matrix.
    pub fn trace_with(&self, m: &DMatrix<C64>) -> C64 {
        (0..m.nrows())
            .map(|y| self.phase(y) * m[(y, y ^ self.flip)])
            .sum()
    }

    /// Row `y ⊕ flip` of `O M` is `φ(y)` times row `y` of `M`.
    pub fn left_multiply(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for y in 0..m.nrows() {
            let ph = self.phase(y);
            let x = y ^ self.flip;
            for c in 0..m.ncols() {
                out[(x, c)] = ph * m[(y, c)];
            }
        }
        out
    }
}

/// Ordered set of all indices with `1 ≤ weight ≤ level`, ascending by code.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    shape: SystemShape,
    level: usize,
    indices: Vec<MultiIndex>,
}

impl IndexSet {
    pub fn up_to_weight(shape: SystemShape, level: usize) -> Result<Self> {
        if level == 0 || level > shape.n() {
            return Err(Error::OutOfRange(format!(
                "level {level} for {} qubits",
                shape.n()
            )));
        }
        let indices = (1..shape.num_strings())
            .map(|code| MultiIndex { code, n: shape.n() })
            .filter(|a| a.weight() <= level)
            .collect();
        Ok(Self {
            shape,
            level,
            indices,
        })
    }

    pub fn shape(&self) -> SystemShape {
        self.shape
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, a: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(a).ok()
    }
}

/// Real Pauli moments `t_a = Tr(O_a ρ)` for all indices of weight `1..=level`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub(crate) set: IndexSet,
    pub(crate) values: Vec<f64>,
}

impl MomentVector {
    pub fn new(set: IndexSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != set.len() {
            return Err(Error::LengthMismatch {
                expected: set.len(),
                got: values.len(),
            });
        }
        if let Some((a, v)) = set
            .indices()
            .iter()
            .zip(&values)
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0 + 1e-9)
        {
            return Err(Error::OutOfRange(format!("moment {a} = {v}")));
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

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.set.indices().iter().copied().zip(self.values.iter().copied())
    }

    /// Restrict to a lower level.
    pub fn truncated(&self, level: usize) -> Result<Self> {
        let set = IndexSet::up_to_weight(self.set.shape(), level)?;
        if level > self.level() {
            return Err(Error::OutOfRange(format!(
                "cannot raise moment level {} to {level}",
                self.level()
            )));
        }
        let values = set
            .indices()
            .iter()
            .map(|a| self.get(a).expect("lower level is a subset"))
            .collect();
        Ok(Self { set, values })
    }
}

/// `Tr(O_a ρ)`, computed in `O(d)`.
pub fn pauli_moment(rho: &DensityMatrix, a: &MultiIndex) -> Result<f64> {
    if a.n() != rho.n() {
        return Err(Error::LengthMismatch {
            expected: rho.n(),
            got: a.n(),
        });
    }
    let t = a.action().trace_with(rho.matrix());
    if t.im.abs() > 1e-10 {
        return Err(Error::ComplexMoment(t.im));
    }
    Ok(t.re)
}

pub fn moment_vector(rho: &DensityMatrix, level: usize) -> Result<MomentVector> {
    let set = IndexSet::up_to_weight(rho.shape(), level)?;
    moments_on(rho, set)
}

pub(crate) fn moments_on(rho: &DensityMatrix, set: IndexSet) -> Result<MomentVector> {
    let values = set
        .indices()
        .iter()
        .map(|a| pauli_moment(rho, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentVector { set, values })
}

/// `H = Σ θ_a O_a`, built in `O(|θ| d)`.
pub fn synthesize<'a, I>(shape: SystemShape, terms: I) -> Result<DMatrix<C64>>
where
    I: IntoIterator<Item = (&'a MultiIndex, f64)>,
{
    let d = shape.dim();
    let mut h = DMatrix::<C64>::zeros(d, d);
    for (a, theta) in terms {
        if a.n() != shape.n() {
            return Err(Error::LengthMismatch {
                expected: shape.n(),
                got: a.n(),
            });
        }
        if !theta.is_finite() {
            return Err(Error::NonFinite(a.to_string()));
        }
        if theta == 0.0 {
            continue;
        }
        let act = a.action();
        for y in 0..d {
            h[(y ^ act.flip, y)] += act.phase(y) * theta;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states;

    fn shape(n: usize) -> SystemShape {
        SystemShape::new(n).unwrap()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(MultiIndex::encode(&[0, 0], shape(2)).unwrap().code(), 0);
        assert_eq!(MultiIndex::encode(&[1, 0], shape(2)).unwrap().code(), 4);
        let a = MultiIndex::encode(&[1, 2, 3, 0], shape(4)).unwrap();
        assert_eq!(a.code(), 108);
        assert_eq!(a.to_string(), "XYZI");
        assert_eq!(MultiIndex::parse("XYZI").unwrap(), a);
    }

    #[test]
    fn encode_errors() {
        assert!(matches!(
            MultiIndex::encode(&[0, 4], shape(2)),
            Err(Error::DigitOutOfRange { digit: 4, position: 1 })
        ));
        assert!(matches!(
            MultiIndex::encode(&[0, 1, 2], shape(2)),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(MultiIndex::parse("XQ").is_err());
    }

    #[test]
    fn weights() {
        assert_eq!(MultiIndex::parse("IIII").unwrap().weight(), 0);
        assert_eq!(MultiIndex::parse("XYZI").unwrap().weight(), 3);
        assert_eq!(MultiIndex::parse("ZZZZZ").unwrap().weight(), 5);
    }

    #[test]
    fn shape_cap() {
        assert!(SystemShape::with_cap(6, 5).is_err());
        assert!(SystemShape::new(7).is_err());
        assert_eq!(SystemShape::new(3).unwrap().dim(), 8);
    }

    #[test]
    fn bell_moments() {
        let bell = states::ghz(2).unwrap();
        assert!((pauli_moment(&bell, &MultiIndex::parse("XX").unwrap()).unwrap() - 1.0).abs() < 1e-14);
        assert!((pauli_moment(&bell, &MultiIndex::parse("II").unwrap()).unwrap() - 1.0).abs() < 1e-14);
        let mv = moment_vector(&bell, 2).unwrap();
        for (a, t) in mv.iter() {
            let expected = match a.to_string().as_str() {
                "XX" | "ZZ" => 1.0,
                "YY" => -1.0,
                _ => 0.0,
            };
            assert!((t - expected).abs() < 1e-14, "{a}: {t}");
        }
    }

    #[test]
    fn maximally_mixed_moments_vanish() {
        let mixed = DensityMatrix::maximally_mixed(shape(4));
        let mv = moment_vector(&mixed, 2).unwrap();
        assert!(mv.values().iter().all(|t| *t == 0.0));
    }

    #[test]
    fn ghz4_two_body_moments() {
        let ghz = states::ghz(4).unwrap();
        let mv = moment_vector(&ghz, 2).unwrap();
        let mut zz = 0;
        for (a, t) in mv.iter() {
            let is_zz = a.weight() == 2 && a.digits().iter().all(|&d| d == 0 || d == 3);
            if is_zz {
                zz += 1;
                assert!((t - 1.0).abs() < 1e-14);
            } else {
                assert!(t.abs() < 1e-14, "{a}: {t}");
            }
        }
        assert_eq!(zz, 6);
    }

    #[test]
    fn synthesize_examples() {
        let empty: Vec<(&MultiIndex, f64)> = vec![];
        assert_eq!(synthesize(shape(2), empty).unwrap(), DMatrix::zeros(4, 4));

        let z = MultiIndex::parse("Z").unwrap();
        let h = synthesize(shape(1), [(&z, 0.7)]).unwrap();
        assert_eq!(h[(0, 0)].re, 0.7);
        assert_eq!(h[(1, 1)].re, -0.7);
        assert_eq!(h[(0, 1)], C64::new(0.0, 0.0));

        let xx = MultiIndex::parse("XX").unwrap();
        let zz = MultiIndex::parse("ZZ").unwrap();
        let h = synthesize(shape(2), [(&xx, 0.5), (&zz, 0.5)]).unwrap();
        // Kronecker-product oracle
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let zm = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let expected = (x.kronecker(&x) + zm.kronecker(&zm)) * 0.5;
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(h[(r, c)], C64::new(expected[(r, c)], 0.0));
            }
        }
        assert!(synthesize(shape(1), [(&z, f64::NAN)]).is_err());
    }

    fn kron_pauli(a: &MultiIndex) -> DMatrix<C64> {
        let i = C64::new(0.0, 1.0);
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let single = [
            DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
            DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        ];
        a.digits()
            .iter()
            .fold(DMatrix::from_element(1, 1, l), |acc, &dg| {
                acc.kronecker(&single[dg as usize])
            })
    }

    #[test]
    fn action_matches_kronecker() {
        let s = shape(3);
        for code in 0..s.num_strings() {
            let a = MultiIndex::from_code(code, s).unwrap();
            let synth = synthesize(s, [(&a, 1.0)]).unwrap();
            assert_eq!(synth, kron_pauli(&a), "{a}");
        }
    }

    #[test]
    fn orthonormal_exhaustive_small() {
        for n in 1..=3 {
            let s = shape(n);
            let ops: Vec<_> = (0..s.num_strings())
                .map(|c| {
                    let a = MultiIndex::from_code(c, s).unwrap();
                    (a, synthesize(s, [(&a, 1.0)]).unwrap())
                })
                .collect();
            for (a, _) in &ops {
                for (b, mb) in &ops {
                    let ip = a.action().trace_with(mb) / s.dim() as f64;
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!((ip.re - expected).abs() < 1e-14 && ip.im.abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn orthonormal_sampled_n5() {
        let s = shape(5);
        for (ca, cb) in [(1, 1), (17, 999), (1023, 1023), (341, 682), (5, 20), (700, 700)] {
            let a = MultiIndex::from_code(ca, s).unwrap();
            let b = MultiIndex::from_code(cb, s).unwrap();
            let mb = synthesize(s, [(&b, 1.0)]).unwrap();
            let ip = a.action().trace_with(&mb) / s.dim() as f64;
            let expected = if ca == cb { 1.0 } else { 0.0 };
            assert!((ip.re - expected).abs() < 1e-14 && ip.im.abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruction_of_random_hermitian() {
        let s = shape(3);
        let d = s.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        let mut x = 0.37f64;
        for r in 0..d {
            for c in r..d {
                x = (x * 7.13 + 0.29).fract();
                let y = (x * 3.7 + 0.11).fract();
                let v = if r == c { C64::new(x - 0.5, 0.0) } else { C64::new(x - 0.5, y - 0.5) };
                m[(r, c)] = v;
                m[(c, r)] = v.conj();
            }
        }
        let all: Vec<_> = (0..s.num_strings())
            .map(|c| MultiIndex::from_code(c, s).unwrap())
            .collect();
        let coeffs: Vec<f64> = all
            .iter()
            .map(|a| a.action().trace_with(&m).re / d as f64)
            .collect();
        let rebuilt = synthesize(s, all.iter().zip(coeffs.iter().copied())).unwrap();
        assert!((rebuilt - m).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn index_set_counts() {
        let s = shape(5);
        assert_eq!(IndexSet::up_to_weight(s, 2).unwrap().len(), 15 + 90);
        assert_eq!(IndexSet::up_to_weight(s, 4).unwrap().len(), 15 + 90 + 270 + 405);
        assert!(IndexSet::up_to_weight(s, 0).is_err());
    }
}

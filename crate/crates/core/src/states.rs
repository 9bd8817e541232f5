//! Benchmark states, depolarization, random ensembles and state files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{synthesize, MultiIndex, SystemShape, C64, MAX_SUPPORTED_QUBITS};
use crate::error::{Error, Result};
use crate::matrix::DensityMatrix;

pub const STATE_FILE_VERSION: &str = "irrcorr-state-v1";
/// Trace slack tolerated when reading a state file.
pub const FILE_TRACE_TOL: f64 = 1e-6;

fn check_n(n: usize, min: usize) -> Result<SystemShape> {
    if n < min {
        return Err(Error::PartyCount {
            n,
            max: MAX_SUPPORTED_QUBITS,
        });
    }
    SystemShape::new(n)
}

fn pure_from_amplitudes(shape: SystemShape, amps: impl Fn(usize) -> f64) -> Result<DensityMatrix> {
    let v: Vec<C64> = (0..shape.dim()).map(|x| C64::new(amps(x), 0.0)).collect();
    DensityMatrix::from_pure(&v)
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn ghz(n: usize) -> Result<DensityMatrix> {
    let shape = check_n(n, 2)?;
    let last = shape.dim() - 1;
    pure_from_amplitudes(shape, |x| if x == 0 || x == last { 1.0 } else { 0.0 })
}

/// Equal-amplitude superposition of all single excitations.
pub fn w(n: usize) -> Result<DensityMatrix> {
    let shape = check_n(n, 2)?;
    pure_from_amplitudes(shape, |x| if x.count_ones() == 1 { 1.0 } else { 0.0 })
}

/// Symmetric state with `k` excitations.
pub fn dicke(n: usize, k: usize) -> Result<DensityMatrix> {
    let shape = check_n(n, 1)?;
    if k > n {
        return Err(Error::OutOfRange(format!("dicke excitation {k} > {n}")));
    }
    pure_from_amplitudes(shape, |x| if x.count_ones() as usize == k { 1.0 } else { 0.0 })
}

/// Four-qubit Smolin state `(I + XXXX + YYYY + ZZZZ)/16`.
pub fn smolin() -> Result<DensityMatrix> {
    let shape = SystemShape::new(4)?;
    let terms: Vec<MultiIndex> = ["IIII", "XXXX", "YYYY", "ZZZZ"]
        .iter()
        .map(|s| MultiIndex::parse(s))
        .collect::<Result<_>>()?;
    let m = synthesize(shape, terms.iter().map(|a| (a, 1.0 / 16.0)))?;
    DensityMatrix::new(m)
}

/// `p₀ I/d + (1 − p₀) ρ`.
pub fn depolarize(rho: &DensityMatrix, p0: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::OutOfRange(format!("p0 = {p0}")));
    }
    let d = rho.dim();
    let mut m = rho.matrix() * C64::new(1.0 - p0, 0.0);
    for i in 0..d {
        m[(i, i)] += p0 / d as f64;
    }
    Ok(DensityMatrix::from_trusted(rho.shape(), m))
}

/// Seeded Ginibre state `GG†/Tr(GG†)` mixed with `I/d` so that every eigenvalue
/// is at least `floor/(1 + floor·d)`.
pub fn random_full_rank(n: usize, seed: u64, floor: f64) -> Result<DensityMatrix> {
    let shape = check_n(n, 1)?;
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::OutOfRange(format!("floor = {floor}")));
    }
    let d = shape.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(normal(), normal()));
    let gg = &g * g.adjoint();
    let rho0 = &gg / gg.trace();
    let mix = floor * d as f64 / (1.0 + floor * d as f64);
    let mut m = rho0 * C64::new(1.0 - mix, 0.0);
    for i in 0..d {
        m[(i, i)] += mix / d as f64;
    }
    DensityMatrix::new(m)
}

/// `ρ = (1/d) Σ t_a O_a` with the identity coefficient fixed at 1.
pub fn from_pauli_moments(shape: SystemShape, moments: &BTreeMap<String, f64>) -> Result<DensityMatrix> {
    let mut terms = vec![(MultiIndex::identity(shape), 1.0)];
    for (key, &t) in moments {
        let a = MultiIndex::parse(key)?;
        if a.n() != shape.n() {
            return Err(Error::LengthMismatch {
                expected: shape.n(),
                got: a.n(),
            });
        }
        if a.is_identity() {
            if t != 1.0 {
                return Err(Error::StateFile(format!("identity coefficient {t} must be 1")));
            }
            continue;
        }
        terms.push((a, t));
    }
    let d = shape.dim() as f64;
    let m = synthesize(shape, terms.iter().map(|(a, t)| (a, t / d)))?;
    DensityMatrix::new(m)
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    format: String,
    n: usize,
    #[serde(flatten)]
    body: StateBody,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum StateBody {
    Dense { real: Vec<f64>, imag: Vec<f64> },
    Pauli { coefficients: BTreeMap<String, f64> },
}

pub fn parse_state_file(text: &str) -> Result<DensityMatrix> {
    let file: StateFile =
        serde_json::from_str(text).map_err(|e| Error::StateFile(e.to_string()))?;
    if file.format != STATE_FILE_VERSION {
        return Err(Error::StateFile(format!("unknown format tag {:?}", file.format)));
    }
    let shape = SystemShape::new(file.n)?;
    let d = shape.dim();
    match file.body {
        StateBody::Dense { real, imag } => {
            if real.len() != d * d || imag.len() != d * d {
                return Err(Error::StateFile(format!(
                    "expected {} entries, got {} real / {} imaginary",
                    d * d,
                    real.len(),
                    imag.len()
                )));
            }
            let m = DMatrix::from_fn(d, d, |r, c| C64::new(real[r * d + c], imag[r * d + c]));
            let rho = DensityMatrix::with_trace_tol(m, FILE_TRACE_TOL)?;
            let tr = rho.matrix().trace().re;
            Ok(DensityMatrix::from_trusted(shape, rho.into_matrix() / C64::new(tr, 0.0)))
        }
        StateBody::Pauli { coefficients } => from_pauli_moments(shape, &coefficients),
    }
}

pub fn state_file_text(rho: &DensityMatrix) -> String {
    let m = rho.matrix();
    let d = rho.dim();
    let file = StateFile {
        format: STATE_FILE_VERSION.into(),
        n: rho.n(),
        body: StateBody::Dense {
            real: (0..d * d).map(|i| m[(i / d, i % d)].re).collect(),
            imag: (0..d * d).map(|i| m[(i / d, i % d)].im).collect(),
        },
    };
    serde_json::to_string_pretty(&file).expect("state file serializes")
}

pub fn load_state(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    parse_state_file(&std::fs::read_to_string(path)?)
}

pub fn save_state(path: impl AsRef<Path>, rho: &DensityMatrix) -> Result<()> {
    std::fs::write(path, state_file_text(rho))?;
    Ok(())
}

/// Family of a state descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Ghz { n: usize },
    W { n: usize },
    Dicke { n: usize, k: usize },
    Smolin,
    Random { n: usize, seed: u64 },
    File { path: PathBuf },
}

/// A named state with optional depolarization, written
/// `ghz:<n> | w:<n> | dicke:<n>:<k> | smolin | random:<n>:seed=<u64> | file:<path>`
/// with an optional `@p0=<float>` suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDescriptor {
    pub kind: StateKind,
    pub p0: Option<f64>,
}

/// Floor used for `random:` states.
pub const RANDOM_FLOOR: f64 = 1e-3;

impl StateDescriptor {
    /// Party count, if known without reading a file.
    pub fn n(&self) -> Option<usize> {
        match self.kind {
            StateKind::Ghz { n } | StateKind::W { n } | StateKind::Dicke { n, .. } => Some(n),
            StateKind::Random { n, .. } => Some(n),
            StateKind::Smolin => Some(4),
            StateKind::File { .. } => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.kind {
            StateKind::Random { seed, .. } => Some(seed),
            _ => None,
        }
    }

    /// Parse and check the party count against `cap`.
    pub fn parse_with_cap(s: &str, cap: usize) -> Result<Self> {
        let desc: Self = s.parse()?;
        if let Some(n) = desc.n() {
            if n > cap.min(MAX_SUPPORTED_QUBITS) {
                return Err(Error::PartyCount {
                    n,
                    max: cap.min(MAX_SUPPORTED_QUBITS),
                });
            }
        }
        Ok(desc)
    }

    /// Construct the state; files are validated against `cap` after loading.
    pub fn build(&self, cap: usize) -> Result<DensityMatrix> {
        let base = match &self.kind {
            StateKind::Ghz { n } => ghz(*n)?,
            StateKind::W { n } => w(*n)?,
            StateKind::Dicke { n, k } => dicke(*n, *k)?,
            StateKind::Smolin => smolin()?,
            StateKind::Random { n, seed } => random_full_rank(*n, *seed, RANDOM_FLOOR)?,
            StateKind::File { path } => load_state(path)?,
        };
        if base.n() > cap.min(MAX_SUPPORTED_QUBITS) {
            return Err(Error::PartyCount {
                n: base.n(),
                max: cap.min(MAX_SUPPORTED_QUBITS),
            });
        }
        match self.p0 {
            Some(p0) => depolarize(&base, p0),
            None => Ok(base),
        }
    }
}

impl fmt::Display for StateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StateKind::Ghz { n } => write!(f, "ghz:{n}")?,
            StateKind::W { n } => write!(f, "w:{n}")?,
            StateKind::Dicke { n, k } => write!(f, "dicke:{n}:{k}")?,
            StateKind::Smolin => write!(f, "smolin")?,
            StateKind::Random { n, seed } => write!(f, "random:{n}:seed={seed}")?,
            StateKind::File { path } => write!(f, "file:{}", path.display())?,
        }
        if let Some(p0) = self.p0 {
            write!(f, "@p0={p0}")?;
        }
        Ok(())
    }
}

fn spec_err(message: impl Into<String>, position: usize) -> Error {
    Error::Spec {
        message: message.into(),
        position,
    }
}

fn parse_uint<T: FromStr>(field: &str, offset: usize, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| spec_err(format!("expected {what}, found {field:?}"), offset))
}

impl FromStr for StateDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (body, p0) = match s.rfind("@p0=") {
            Some(at) => {
                let text = &s[at + 4..];
                let p0: f64 = text
                    .parse()
                    .map_err(|_| spec_err(format!("invalid p0 {text:?}"), at + 4))?;
                if !(0.0..=1.0).contains(&p0) {
                    return Err(spec_err(format!("p0 = {p0} outside [0, 1]"), at + 4));
                }
                (&s[..at], Some(p0))
            }
            None => (s, None),
        };
        let (head, rest) = match body.find(':') {
            Some(i) => (&body[..i], Some((&body[i + 1..], i + 1))),
            None => (body, None),
        };
        let fields = |rest: Option<(&str, usize)>, count: usize| -> Result<Vec<(String, usize)>> {
            let (text, start) =
                rest.ok_or_else(|| spec_err(format!("{head} needs {count} field(s)"), head.len()))?;
            let mut out = Vec::new();
            let mut pos = start;
            for part in text.split(':') {
                out.push((part.to_string(), pos));
                pos += part.len() + 1;
            }
            if out.len() != count {
                return Err(spec_err(
                    format!("{head} takes {count} field(s), got {}", out.len()),
                    start,
                ));
            }
            Ok(out)
        };
        let kind = match head {
            "ghz" | "w" => {
                let f = fields(rest, 1)?;
                let n: usize = parse_uint(&f[0].0, f[0].1, "qubit count")?;
                if n < 2 {
                    return Err(spec_err(format!("{head} needs at least 2 qubits"), f[0].1));
                }
                if head == "ghz" {
                    StateKind::Ghz { n }
                } else {
                    StateKind::W { n }
                }
            }
            "dicke" => {
                let f = fields(rest, 2)?;
                let n: usize = parse_uint(&f[0].0, f[0].1, "qubit count")?;
                let k: usize = parse_uint(&f[1].0, f[1].1, "excitation count")?;
                if n < 1 || k > n {
                    return Err(spec_err(format!("dicke:{n}:{k} out of range"), f[1].1));
                }
                StateKind::Dicke { n, k }
            }
            "smolin" => {
                if rest.is_some() {
                    return Err(spec_err("smolin takes no fields", head.len()));
                }
                StateKind::Smolin
            }
            "random" => {
                let f = fields(rest, 2)?;
                let n: usize = parse_uint(&f[0].0, f[0].1, "qubit count")?;
                if n < 1 {
                    return Err(spec_err("random needs at least 1 qubit", f[0].1));
                }
                let seed_text = f[1]
                    .0
                    .strip_prefix("seed=")
                    .ok_or_else(|| spec_err("expected seed=<u64>", f[1].1))?;
                let seed: u64 = parse_uint(seed_text, f[1].1 + 5, "u64 seed")?;
                StateKind::Random { n, seed }
            }
            "file" => {
                let (path, start) = rest.ok_or_else(|| spec_err("file needs a path", head.len()))?;
                if path.is_empty() {
                    return Err(spec_err("empty path", start));
                }
                StateKind::File {
                    path: PathBuf::from(path),
                }
            }
            other => return Err(spec_err(format!("unknown state kind {other:?}"), 0)),
        };
        Ok(StateDescriptor { kind, p0 })
    }
}

//! Irreducible multiparty correlations of qubit states.
//!
//! The total correlation `C_T = Σ_i S(ρ^{(i)}) − S(ρ)` of an `n`-qubit state
//! splits into irreducible `m`-party parts `C_m = S(ρ_m‖ρ_{m−1})`, where `ρ_m`
//! is the maximum-entropy state agreeing with `ρ` on every `m`-party marginal.
//! Each `ρ_m` is found by minimizing a convex dual over the coefficients of
//! `ln ρ_m` in the Pauli basis; states close to rank-deficient are reached by
//! a depolarizing continuation from `I/d` with warm starts.
//!
//! Modules:
//! - [`basis`]: Pauli-string indexing, moments, operator synthesis.
//! - [`matrix`]: eigendecomposition, entropies, partial traces, Gibbs states.
//! - [`solver`]: the projection solver and its certificate.
//! - [`spectrum`]: the per-state decomposition and the continuation sweep.
//! - [`states`]: benchmark states, random ensembles and state files.
//! - [`oracle`]: classical IPF and closed-form cross-checks.

pub mod basis;
pub mod error;
pub mod matrix;
pub mod oracle;
pub mod solver;
pub mod spectrum;
pub mod states;

pub use basis::{MomentVector, MultiIndex, SystemShape};
pub use error::{Error, Result};
pub use matrix::DensityMatrix;
pub use solver::{ProjectionProblem, ProjectionResult, SolveError, ThetaVector};
pub use spectrum::{CorrelationRecord, SpectrumSettings, SweepResult, SweepSchedule};
pub use states::StateDescriptor;

//! Browser demo: decompose a named state, run a depolarizing sweep for
//! plotting, or list its low-order Pauli moments. Each operation returns a
//! JSON string; the `wasm_bindgen` exports wrap the plain Rust functions so
//! the same code is tested natively.

use std::collections::BTreeMap;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use irrcorr::basis::moment_vector;
use irrcorr::spectrum::{correlation_levels, sweep, SpectrumSettings, SweepSchedule};
use irrcorr::states::{StateDescriptor, StateKind};

/// Largest party count accepted from the page.
pub const DEMO_MAX_QUBITS: usize = 5;
/// Largest sweep grid accepted from the page.
pub const DEMO_MAX_STEPS: usize = 200;
/// Moments smaller than this are left out of listings.
pub const MOMENT_CUTOFF: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error(transparent)]
    Core(#[from] irrcorr::Error),
    #[error("file states are not available in the browser")]
    FileState,
    #[error("steps must be between 1 and {DEMO_MAX_STEPS}, got {0}")]
    Steps(usize),
    #[error("serialization failed: {0}")]
    Json(String),
}

fn parse(spec: &str) -> Result<StateDescriptor, DemoError> {
    let desc = StateDescriptor::parse_with_cap(spec.trim(), DEMO_MAX_QUBITS)?;
    if matches!(desc.kind, StateKind::File { .. }) {
        return Err(DemoError::FileState);
    }
    Ok(desc)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, DemoError> {
    serde_json::to_string(value).map_err(|e| DemoError::Json(e.to_string()))
}

#[derive(Serialize)]
struct DecomposeView {
    state: String,
    n: usize,
    entropy_bits: f64,
    total_bits: f64,
    orders: BTreeMap<usize, Option<f64>>,
    flags: String,
    max_residual: f64,
}

/// Correlation spectrum of one state.
pub fn decompose_state(spec: &str) -> Result<String, DemoError> {
    let desc = parse(spec)?;
    let rho = desc.build(DEMO_MAX_QUBITS)?;
    let (record, _) = correlation_levels(&rho, None, &SpectrumSettings::default())?;
    to_json(&DecomposeView {
        state: desc.to_string(),
        n: record.n,
        entropy_bits: record.entropy_bits,
        total_bits: record.total_bits,
        flags: record.flag_string(),
        max_residual: record.max_residual,
        orders: record.orders,
    })
}

/// Column-oriented sweep data, ready for plotting against `p0`.
#[derive(Serialize)]
struct SweepView {
    state: String,
    n: usize,
    p0: Vec<f64>,
    total_bits: Vec<f64>,
    /// `C_m` series keyed by order; `null` where a point is flagged.
    orders: BTreeMap<usize, Vec<Option<f64>>>,
    flags: Vec<String>,
}

/// Depolarizing continuation from `I/d` to the state on an `steps`-point grid.
pub fn sweep_state(spec: &str, steps: usize) -> Result<String, DemoError> {
    if steps == 0 || steps > DEMO_MAX_STEPS {
        return Err(DemoError::Steps(steps));
    }
    let desc = parse(spec)?;
    let rho = desc.build(DEMO_MAX_QUBITS)?;
    let result = sweep(&rho, SweepSchedule::new(steps)?, &SpectrumSettings::default())?;
    let orders = (2..=result.n)
        .map(|m| {
            let series = result
                .records
                .iter()
                .map(|r| r.order(m).filter(|_| r.order_ok(m)))
                .collect();
            (m, series)
        })
        .collect();
    to_json(&SweepView {
        state: desc.to_string(),
        n: result.n,
        p0: result.records.iter().map(|r| r.p0).collect(),
        total_bits: result.records.iter().map(|r| r.total_bits).collect(),
        orders,
        flags: result.records.iter().map(|r| r.flag_string()).collect(),
    })
}

#[derive(Serialize)]
struct MomentView {
    state: String,
    level: usize,
    /// Nonzero `Tr(O_a ρ)` keyed by Pauli string, ordered by weight then string.
    moments: Vec<(String, f64)>,
}

/// Nonzero Pauli moments of weight `1..=level`.
pub fn state_moments(spec: &str, level: usize) -> Result<String, DemoError> {
    let desc = parse(spec)?;
    let rho = desc.build(DEMO_MAX_QUBITS)?;
    let level = level.clamp(1, rho.n());
    let mv = moment_vector(&rho, level)?;
    let mut moments: Vec<(usize, String, f64)> = mv
        .iter()
        .filter(|(_, v)| v.abs() > MOMENT_CUTOFF)
        .map(|(a, v)| (a.weight(), a.to_string(), v))
        .collect();
    moments.sort_by(|x, y| (x.0, &x.1).cmp(&(y.0, &y.1)));
    to_json(&MomentView {
        state: desc.to_string(),
        level,
        moments: moments.into_iter().map(|(_, s, v)| (s, v)).collect(),
    })
}

fn js<T>(r: Result<T, DemoError>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn decompose(spec: &str) -> Result<String, JsError> {
    js(decompose_state(spec))
}

#[wasm_bindgen(js_name = sweep)]
pub fn sweep_js(spec: &str, steps: usize) -> Result<String, JsError> {
    js(sweep_state(spec, steps))
}

#[wasm_bindgen]
pub fn moments(spec: &str, level: usize) -> Result<String, JsError> {
    js(state_moments(spec, level))
}

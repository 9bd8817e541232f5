//! End-to-end acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the `irrcorr` binary for the benchmark reproductions and determinism
//! checks, and the library directly for the numerical property suites.

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use irrcorr::basis::moment_vector;
use irrcorr::matrix::DensityMatrix;
use irrcorr::oracle::{diagonal_embedding, diagonal_extraction, ipf_maxent, mutual_information_check, JointDistribution};
use irrcorr::solver::{certify, dual_objective_grad, hessian, solve_projection, ProjectionProblem, ThetaVector};
use irrcorr::spectrum::{decompose, SpectrumSettings};
use irrcorr::states;

const BIN: &str = env!("CARGO_BIN_EXE_irrcorr");

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

/// Collects individual conditions of one criterion.
#[derive(Default)]
struct Conditions {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Conditions {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if !ok {
            self.failures.push(what);
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn verdict(self) -> Verdict {
        if self.failures.is_empty() {
            Verdict::new(true, self.notes.join("; "))
        } else {
            Verdict::new(false, self.failures.join("; "))
        }
    }
}

struct CliRun {
    code: i32,
    stdout: String,
    stderr: String,
    elapsed: Duration,
}

fn irrcorr(args: &[&str]) -> CliRun {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(args)
        .env_remove("IRRCORR_MAX_QUBITS")
        .output()
        .expect("spawn irrcorr");
    CliRun {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
        elapsed: start.elapsed(),
    }
}

/// Data rows of CSV output keyed by column name.
fn csv_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header: Vec<String> = match lines.next() {
        Some(h) => h.split(',').map(str::to_string).collect(),
        None => return Vec::new(),
    };
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, col: &str) -> f64 {
    row.get(col)
        .and_then(|v| v.parse().ok())
        .unwrap_or(f64::NAN)
}

fn single_row(run: &CliRun, c: &mut Conditions, label: &str) -> Option<BTreeMap<String, String>> {
    c.check(run.code == 0, format!("{label} exited {} ({})", run.code, run.stderr.trim()));
    let rows = csv_rows(&run.stdout);
    c.check(rows.len() == 1, format!("{label} produced {} rows", rows.len()));
    rows.into_iter().next()
}

fn within(c: &mut Conditions, name: &str, value: f64, target: f64, tol: f64) {
    let ok = (value - target).abs() <= tol;
    c.check(ok, format!("{name}={value:.6} not within {tol} of {target}"));
    if ok {
        c.note(format!("{name}={value:.4}"));
    }
}

fn at_most(c: &mut Conditions, name: &str, value: f64, bound: f64) {
    let ok = value <= bound;
    c.check(ok, format!("{name}={value:.3e} exceeds {bound:e}"));
}

/// Sweep CSVs shared between the reproduction and monotonicity criteria.
#[derive(Default)]
struct Sweeps(BTreeMap<&'static str, CliRun>);

fn criterion_ghz4(sweeps: &mut Sweeps) -> Verdict {
    let mut c = Conditions::default();
    let compute = irrcorr(&["compute", "--state", "ghz:4@p0=0.001"]);
    if let Some(row) = single_row(&compute, &mut c, "compute") {
        within(&mut c, "C_2", num(&row, "C_2_bits"), 3.0, 0.05);
        at_most(&mut c, "|C_3|", num(&row, "C_3_bits").abs(), 0.02);
        within(&mut c, "C_4", num(&row, "C_4_bits"), 1.0, 0.05);
        within(&mut c, "C_T", num(&row, "C_T_bits"), 4.0, 0.05);
    }
    let sweep = irrcorr(&["sweep", "--state", "ghz:4", "--steps", "100"]);
    c.check(sweep.code == 0, format!("sweep exited {}", sweep.code));
    c.check(csv_rows(&sweep.stdout).len() == 101, "sweep row count");
    let elapsed = compute.elapsed + sweep.elapsed;
    c.check(elapsed <= Duration::from_secs(60), format!("runtime {elapsed:.1?} > 60 s"));
    c.note(format!("runtime {:.1}s", elapsed.as_secs_f64()));
    sweeps.0.insert("ghz:4", sweep);
    c.verdict()
}

fn criterion_smolin(sweeps: &mut Sweeps) -> Verdict {
    let mut c = Conditions::default();
    let compute = irrcorr(&["compute", "--state", "smolin@p0=0.001"]);
    if let Some(row) = single_row(&compute, &mut c, "compute") {
        within(&mut c, "C_4", num(&row, "C_4_bits"), 2.0, 0.05);
        at_most(&mut c, "C_2+C_3", num(&row, "C_2_bits") + num(&row, "C_3_bits"), 0.05);
        let gap = (num(&row, "C_T_bits") - (4.0 - num(&row, "S_bits"))).abs();
        at_most(&mut c, "|C_T-(4-S)|", gap, 1e-6);
        c.note(format!("|C_T-(4-S)|={gap:.1e}"));
    }
    let sweep = irrcorr(&["sweep", "--state", "smolin", "--steps", "100"]);
    c.check(sweep.code == 0, format!("sweep exited {}", sweep.code));
    for row in csv_rows(&sweep.stdout) {
        let gap = (num(&row, "C_T_bits") - (4.0 - num(&row, "S_bits"))).abs();
        c.check(gap <= 1e-6, format!("sweep k={} |C_T-(4-S)|={gap:.1e}", row["k"]));
    }
    sweeps.0.insert("smolin", sweep);
    c.verdict()
}

fn criterion_w5(sweeps: &mut Sweeps) -> Verdict {
    let mut c = Conditions::default();
    let compute = irrcorr(&["compute", "--state", "w:5@p0=0.001"]);
    if let Some(row) = single_row(&compute, &mut c, "compute") {
        within(&mut c, "C_2", num(&row, "C_2_bits"), 3.61, 0.10);
        let higher: f64 = (3..=5).map(|m| num(&row, &format!("C_{m}_bits"))).sum();
        at_most(&mut c, "C_3+C_4+C_5", higher, 0.10);
        c.note(format!("C_3+C_4+C_5={higher:.2e}"));
    }
    let sweep = irrcorr(&["sweep", "--state", "w:5", "--steps", "100"]);
    c.check(sweep.code == 0, format!("sweep exited {}", sweep.code));
    let rows = csv_rows(&sweep.stdout);
    c.check(rows.len() == 101, "sweep row count");
    let flagged: Vec<&str> = rows
        .iter()
        .filter(|r| r["flags"] != "ok")
        .map(|r| r["k"].as_str())
        .collect();
    c.check(flagged.is_empty(), format!("flagged grid points k={}", flagged.join(",")));
    c.check(
        sweep.elapsed <= Duration::from_secs(600),
        format!("sweep took {:.1?} > 10 min", sweep.elapsed),
    );
    c.note(format!("sweep {:.1}s", sweep.elapsed.as_secs_f64()));
    sweeps.0.insert("w:5", sweep);
    c.verdict()
}

fn criterion_monotone(sweeps: &Sweeps) -> Verdict {
    let mut c = Conditions::default();
    for name in ["ghz:4", "smolin", "w:5"] {
        let Some(run) = sweeps.0.get(name) else {
            c.check(false, format!("{name} sweep missing"));
            continue;
        };
        let rows: Vec<_> = csv_rows(&run.stdout)
            .into_iter()
            .filter(|r| r["flags"] == "ok")
            .collect();
        c.check(rows.len() >= 2, format!("{name}: too few converged records"));
        let mut worst = 0.0f64;
        for pair in rows.windows(2) {
            // rows run from p0 = 1 down to 0, so C_T must not decrease
            worst = worst.max(num(&pair[0], "C_T_bits") - num(&pair[1], "C_T_bits"));
        }
        c.check(worst <= 1e-6, format!("{name}: C_T rises with p0 by {worst:.2e}"));
        c.note(format!("{name} {} records", rows.len()));
    }
    c.verdict()
}

fn criterion_certificates() -> Verdict {
    let mut c = Conditions::default();
    let settings = SpectrumSettings::default();
    let (mut r7, mut r8, mut sum, mut ident) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 1..=10 {
        for p0 in [0.0, 0.2] {
            let rho = states::random_full_rank(3, seed, states::RANDOM_FLOOR)
                .and_then(|r| states::depolarize(&r, p0))
                .expect("random state");
            let dec = match decompose(&rho, None, &settings) {
                Ok(d) => d,
                Err(e) => {
                    c.check(false, format!("seed {seed} p0 {p0}: {e}"));
                    continue;
                }
            };
            let proj = &dec.projections[&2];
            match certify(&proj.state, &moment_vector(&rho, 3).expect("moments"), 2, settings.tolerance) {
                Ok(cert) => {
                    r7 = r7.max(cert.moment_residual);
                    r8 = r8.max(cert.log_residual);
                }
                Err(e) => c.check(false, format!("seed {seed} p0 {p0}: {e}")),
            }
            sum = sum.max(dec.record.sum_rule_gap.unwrap_or(f64::INFINITY));
            ident = ident.max(dec.record.identity_gap);
        }
    }
    at_most(&mut c, "moment residual", r7, 1e-8);
    at_most(&mut c, "log residual", r8, 1e-8);
    at_most(&mut c, "sum rule gap", sum, 1e-6);
    at_most(&mut c, "identity gap", ident, 1e-6);
    c.note(format!("r7={r7:.1e} r8={r8:.1e} sum={sum:.1e} identity={ident:.1e}"));
    c.verdict()
}

fn criterion_oracles() -> Verdict {
    let mut c = Conditions::default();
    let settings = SpectrumSettings::default();
    let mut ipf_gap = 0.0f64;
    for seed in 1..=10 {
        let rho = states::random_full_rank(3, 1000 + seed, 1e-2).expect("random state");
        let weights = (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re).collect();
        let p = JointDistribution::from_weights(3, weights).expect("positive weights");
        let diag = diagonal_embedding(&p).expect("embedding");
        let q = ipf_maxent(&p, 2, 1e-12).expect("classical fit");
        let gap = decompose(&diag, None, &settings)
            .and_then(|d| diagonal_extraction(&d.projections[&2].state))
            .map(|solved| solved.max_abs_diff(&q));
        match gap {
            Ok(g) => ipf_gap = ipf_gap.max(g),
            Err(e) => c.check(false, format!("diagonal seed {seed}: {e}")),
        }
    }
    at_most(&mut c, "classical fit gap", ipf_gap, 1e-7);
    let mut mi_gap = 0.0f64;
    for seed in 1..=10 {
        let rho = states::random_full_rank(2, 2000 + seed, states::RANDOM_FLOOR).expect("random state");
        let gap = decompose(&rho, None, &settings).and_then(|d| {
            let mi = mutual_information_check(&rho)?;
            Ok((d.record.order(2).unwrap_or(f64::NAN) - mi).abs())
        });
        match gap {
            Ok(g) => mi_gap = mi_gap.max(g),
            Err(e) => c.check(false, format!("two-qubit seed {seed}: {e}")),
        }
    }
    at_most(&mut c, "mutual information gap", mi_gap, 1e-7);
    c.note(format!("classical fit {ipf_gap:.1e}; mutual information {mi_gap:.1e}"));
    c.verdict()
}

fn pseudo_random(seed: u64, len: usize, scale: f64) -> Vec<f64> {
    let mut x = seed ^ 0x9E37_79B9_7F4A_7C15;
    (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            ((x >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0 * scale
        })
        .collect()
}

fn theta_for(problem: &ProjectionProblem, values: Vec<f64>) -> ThetaVector {
    ThetaVector::new(problem.index_set().clone(), values).expect("matching length")
}

fn criterion_derivatives() -> Verdict {
    let mut c = Conditions::default();
    let h = 1e-5;
    let (mut grad_err, mut hess_err, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for seed in 0..5u64 {
        for (n, m) in [(2, 1), (3, 2)] {
            let rho = states::random_full_rank(n, 300 + seed, states::RANDOM_FLOOR).expect("random state");
            let problem = ProjectionProblem::from_state(&rho, m).expect("problem");
            let base = pseudo_random(seed * 7 + n as u64, problem.dim(), 0.5);
            let theta = theta_for(&problem, base.clone());
            let at = |i: usize, step: f64| {
                let mut v = base.clone();
                v[i] += step;
                dual_objective_grad(&theta_for(&problem, v), &problem).expect("objective")
            };
            let (_, g) = dual_objective_grad(&theta, &problem).expect("objective");
            let hess = hessian(&theta, &problem).expect("hessian");
            for i in 0..problem.dim() {
                let (fp, gp) = at(i, h);
                let (fm, gm) = at(i, -h);
                grad_err = grad_err.max(((fp - fm) / (2.0 * h) - g[i]).abs());
                for j in 0..problem.dim() {
                    hess_err = hess_err.max(((gp[j] - gm[j]) / (2.0 * h) - hess[(j, i)]).abs());
                }
            }
            min_eig = min_eig.min(hess.symmetric_eigenvalues().min());
        }
    }
    at_most(&mut c, "gradient error", grad_err, 1e-6);
    at_most(&mut c, "hessian error", hess_err, 1e-5);
    c.check(min_eig >= -1e-10, format!("hessian min eigenvalue {min_eig:.2e}"));
    c.note(format!("gradient {grad_err:.1e}; hessian {hess_err:.1e}; min eigenvalue {min_eig:.2e}"));
    c.verdict()
}

fn criterion_init_independence() -> Verdict {
    let mut c = Conditions::default();
    let mut cases: Vec<(String, DensityMatrix, usize)> = Vec::new();
    for seed in 1..=5 {
        let rho = states::random_full_rank(3, 400 + seed, states::RANDOM_FLOOR).expect("random state");
        cases.push((format!("random3 seed {seed}"), rho, 2));
    }
    let ghz = states::depolarize(&states::ghz(4).expect("ghz"), 0.1).expect("depolarize");
    cases.push(("ghz4 level 2".into(), ghz.clone(), 2));
    cases.push(("ghz4 level 3".into(), ghz, 3));
    let w = states::depolarize(&states::w(4).expect("w"), 0.05).expect("depolarize");
    cases.push(("w4 level 2".into(), w, 2));
    let mut worst = 0.0f64;
    for (i, (name, rho, m)) in cases.iter().enumerate() {
        let problem = ProjectionProblem::from_state(rho, *m).expect("problem");
        let zero = ThetaVector::zeros(problem.index_set().clone());
        let random = theta_for(&problem, pseudo_random(500 + i as u64, problem.dim(), 1.0));
        match (solve_projection(&problem, &zero), solve_projection(&problem, &random)) {
            (Ok(a), Ok(b)) => worst = worst.max(a.state.max_abs_diff(&b.state)),
            (a, b) => c.check(
                false,
                format!("{name}: zero-init ok={} random-init ok={}", a.is_ok(), b.is_ok()),
            ),
        }
    }
    at_most(&mut c, "max entrywise difference", worst, 1e-7);
    c.note(format!("{} problems, max difference {worst:.1e}", cases.len()));
    c.verdict()
}

fn criterion_determinism() -> Verdict {
    let mut c = Conditions::default();
    let dir = tempfile::tempdir().expect("temp dir");
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let invocations: Vec<Vec<String>> = vec![
        vec!["compute", "--state", "random:3:seed=42@p0=0.1"],
        vec!["compute", "--state", "w:4@p0=0.05", "--format", "structured"],
        vec!["sweep", "--state", "ghz:3", "--steps", "25"],
        vec!["sweep", "--state", "dicke:4:2", "--steps", "10", "--levels", "2,4", "--format", "structured"],
        vec!["verify", "--state", "smolin"],
        vec!["verify", "--state", "random:3:seed=7@p0=0.2", "--format", "structured"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(str::to_string).collect())
    .collect();
    for args in &invocations {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (a, b) = (irrcorr(&args), irrcorr(&args));
        c.check(
            a.code == b.code && a.stdout == b.stdout && !a.stdout.is_empty(),
            format!("`{}` differs between runs", args.join(" ")),
        );
    }
    let file_args = |path: &std::path::Path| {
        vec![
            "sweep".to_string(),
            "--state".into(),
            "random:4:seed=3".into(),
            "--steps".into(),
            "8".into(),
            "--out".into(),
            path.display().to_string(),
        ]
    };
    for path in [&out_a, &out_b] {
        let args = file_args(path);
        let run = irrcorr(&args.iter().map(String::as_str).collect::<Vec<_>>());
        c.check(run.code == 0 && run.stdout.is_empty(), "--out run");
    }
    let (a, b) = (std::fs::read(&out_a), std::fs::read(&out_b));
    c.check(
        matches!((&a, &b), (Ok(x), Ok(y)) if x == y && !x.is_empty()),
        "--out files differ",
    );
    c.note(format!("{} commands run twice, byte-identical", invocations.len() + 1));
    c.verdict()
}

type Criterion = Box<dyn FnOnce(&mut Sweeps) -> Verdict>;

fn main() -> ExitCode {
    let mut sweeps = Sweeps::default();
    let criteria: Vec<(u8, &str, Criterion)> = vec![
        (1, "GHZ4 reproduction", Box::new(criterion_ghz4)),
        (2, "Smolin reproduction", Box::new(criterion_smolin)),
        (3, "W5 reproduction", Box::new(criterion_w5)),
        (4, "total correlation monotone in p0", Box::new(|s: &mut Sweeps| criterion_monotone(s))),
        (5, "certificate suite", Box::new(|_: &mut Sweeps| criterion_certificates())),
        (6, "oracle equivalence", Box::new(|_: &mut Sweeps| criterion_oracles())),
        (7, "derivative checks", Box::new(|_: &mut Sweeps| criterion_derivatives())),
        (8, "initialization independence", Box::new(|_: &mut Sweeps| criterion_init_independence())),
        (9, "deterministic output", Box::new(|_: &mut Sweeps| criterion_determinism())),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let v = run(&mut sweeps);
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {id} ({name}): {} [{:.1}s] {}",
            if v.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use irrcorr::basis::{moment_vector, MultiIndex, SystemShape};
use irrcorr::matrix::{partial_trace, rel_entropy, vn_entropy, DensityMatrix};
use irrcorr::oracle::{diagonal_embedding, diagonal_extraction, ipf_maxent, JointDistribution};
use irrcorr::solver::{certify, solve_projection, ProjectionProblem, ThetaVector};
use irrcorr::spectrum::{correlation_levels, product_of_marginals, sweep, SpectrumSettings, SweepSchedule};
use irrcorr::states::{self, StateDescriptor};

fn diagonal_distribution(seed: u64) -> JointDistribution {
    let rho = states::random_full_rank(3, seed, 1e-2).unwrap();
    let weights = (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re).collect();
    JointDistribution::from_weights(3, weights).unwrap()
}

#[test]
fn diagonal_projection_matches_classical_fit() {
    for seed in 0..5 {
        let p = diagonal_distribution(seed);
        let rho = diagonal_embedding(&p).unwrap();
        let problem = ProjectionProblem::from_state(&rho, 2).unwrap();
        let r = solve_projection(&problem, &ThetaVector::zeros(problem.index_set().clone())).unwrap();
        assert!(r.state.off_diagonal_magnitude() <= 1e-9);
        let q = ipf_maxent(&p, 2, 1e-12).unwrap();
        let solved = diagonal_extraction(&r.state).unwrap();
        assert!(solved.max_abs_diff(&q) <= 1e-7, "seed {seed}");
    }
}

#[test]
fn state_file_round_trip_preserves_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let rho = states::depolarize(&states::w(3).unwrap(), 0.1).unwrap();
    states::save_state(&path, &rho).unwrap();
    let desc: StateDescriptor = format!("file:{}", path.display()).parse().unwrap();
    let loaded = desc.build(5).unwrap();
    assert!(loaded.max_abs_diff(&rho) < 1e-15);
    let settings = SpectrumSettings::default();
    let (a, _) = correlation_levels(&rho, None, &settings).unwrap();
    let (b, _) = correlation_levels(&loaded, None, &settings).unwrap();
    for m in 2..=3 {
        assert_abs_diff_eq!(a.order(m).unwrap(), b.order(m).unwrap(), epsilon = 1e-9);
    }
}

#[test]
fn pauli_file_describes_same_state() {
    let rho = states::smolin().unwrap();
    let mut coeffs = BTreeMap::new();
    for s in ["XXXX", "YYYY", "ZZZZ"] {
        coeffs.insert(s.to_string(), 1.0);
    }
    let built = states::from_pauli_moments(SystemShape::new(4).unwrap(), &coeffs).unwrap();
    assert!(built.max_abs_diff(&rho) < 1e-15);
}

#[test]
fn decomposition_identities_on_random_states() {
    for seed in 0..3 {
        let rho = states::random_full_rank(4, seed, 1e-3).unwrap();
        let (record, _) = correlation_levels(&rho, None, &SpectrumSettings::default()).unwrap();
        assert!(record.all_converged(), "{}", record.flag_string());
        assert!(record.sum_rule_gap.unwrap() <= 1e-6);
        assert!(record.identity_gap <= 1e-6);
        let spectral = rel_entropy(&rho, &product_of_marginals(&rho).unwrap()).unwrap();
        assert_abs_diff_eq!(spectral, record.total_bits, epsilon = 1e-9);
        let marginals: f64 = (0..4).map(|i| vn_entropy(&partial_trace(&rho, &[i]).unwrap())).sum();
        assert_abs_diff_eq!(marginals - vn_entropy(&rho), record.total_bits, epsilon = 1e-9);
    }
}

#[test]
fn projections_certify_against_original_moments() {
    let rho = states::depolarize(&states::dicke(4, 2).unwrap(), 0.05).unwrap();
    for m in 1..4 {
        let problem = ProjectionProblem::from_state(&rho, m).unwrap();
        let r = solve_projection(&problem, &ThetaVector::zeros(problem.index_set().clone())).unwrap();
        let cert = certify(&r.state, &moment_vector(&rho, 4).unwrap(), m, 1e-9).unwrap();
        assert!(cert.passed, "level {m}: {cert:?}");
    }
}

#[test]
fn short_sweep_total_correlation_is_monotone() {
    let rho = states::ghz(3).unwrap();
    let result = sweep(&rho, SweepSchedule::new(20).unwrap(), &SpectrumSettings::default()).unwrap();
    assert_eq!(result.records.len(), 21);
    for pair in result.records.windows(2) {
        // p0 decreases along the sweep, so C_T must not drop
        assert!(pair[1].total_bits >= pair[0].total_bits - 1e-6);
    }
    assert_abs_diff_eq!(result.records.last().unwrap().total_bits, 3.0, epsilon = 1e-9);
}

fn arb_index(n: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..4, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multi_index_code_round_trip(digits in (1usize..=5).prop_flat_map(arb_index)) {
        let shape = SystemShape::new(digits.len()).unwrap();
        let a = MultiIndex::encode(&digits, shape).unwrap();
        prop_assert_eq!(a.digits(), digits.clone());
        let b = MultiIndex::from_code(a.code(), shape).unwrap();
        prop_assert_eq!(&a, &b);
        let text = a.to_string();
        prop_assert_eq!(text.parse::<MultiIndex>().unwrap(), a);
        prop_assert_eq!(a.weight(), digits.iter().filter(|&&d| d != 0).count());
    }

    #[test]
    fn depolarizing_composes(seed in 0u64..1000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let rho = states::random_full_rank(2, seed, 1e-3).unwrap();
        let twice = states::depolarize(&states::depolarize(&rho, a).unwrap(), b).unwrap();
        let once = states::depolarize(&rho, 1.0 - (1.0 - a) * (1.0 - b)).unwrap();
        prop_assert!(twice.max_abs_diff(&once) < 1e-14);
    }

    #[test]
    fn depolarizing_never_lowers_entropy(seed in 0u64..1000, p in 0.0f64..1.0) {
        let rho = states::random_full_rank(3, seed, 1e-3).unwrap();
        let mixed = states::depolarize(&rho, p).unwrap();
        prop_assert!(vn_entropy(&mixed) >= vn_entropy(&rho) - 1e-12);
        prop_assert!(mixed.min_eigenvalue() >= p / 8.0 - 1e-14);
    }

    #[test]
    fn descriptor_display_round_trips(n in 2usize..=5, seed in any::<u64>(), p in proptest::option::of(0.0f64..1.0)) {
        let text = match p {
            Some(p) => format!("random:{n}:seed={seed}@p0={p}"),
            None => format!("random:{n}:seed={seed}"),
        };
        let desc: StateDescriptor = text.parse().unwrap();
        prop_assert_eq!(desc.seed(), Some(seed));
        let again: StateDescriptor = desc.to_string().parse().unwrap();
        prop_assert_eq!(again, desc);
    }

    #[test]
    fn marginal_traces_preserved(seed in 0u64..1000) {
        let rho = states::random_full_rank(3, seed, 1e-3).unwrap();
        for keep in [vec![0], vec![1, 2], vec![0, 2]] {
            let r: DensityMatrix = partial_trace(&rho, &keep).unwrap();
            let tr: f64 = (0..r.dim()).map(|i| r.matrix()[(i, i)].re).sum();
            prop_assert!((tr - 1.0).abs() < 1e-12);
        }
    }
}

mod common;

use preentangle::analysis::{
    chsh_max, concurrence, ensemble_state_from_preps, exact_probabilities, negativity,
    ppt_min_eigenvalue,
};
use preentangle::protocol::{
    measure_with_uniform, run_experiment, Apparatus, ExperimentConfig, ProjectiveMeasurement,
    RunRecord, Scenario,
};
use preentangle::qmath::{hermitian_eig, ComplexMatrix};
use preentangle::states::{pauli_projectors, BellState, Outcome, PauliAxis, PrepLabel};
use preentangle::tomography::{invert_probabilities, SelectionCriterion, Site};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn shared_records() -> &'static (ExperimentConfig, Vec<RunRecord>) {
    static DATA: OnceLock<(ExperimentConfig, Vec<RunRecord>)> = OnceLock::new();
    DATA.get_or_init(|| {
        let cfg = ExperimentConfig::new(Scenario::Standard, 4_000, 17);
        let recs = run_experiment::<f64>(&cfg).unwrap();
        (cfg, recs)
    })
}

fn any_criterion() -> impl Strategy<Value = SelectionCriterion> {
    let bell = proptest::option::of(proptest::sample::subsequence(
        BellState::ALL.to_vec(),
        1..=4,
    ));
    let label = proptest::option::of(prop_oneof![Just(PrepLabel::One), Just(PrepLabel::Two)]);
    let outcome = (0..4usize, 0..3usize, any::<bool>()).prop_map(|(s, a, plus)| {
        let site = [Site::PA, Site::PB, Site::RC, Site::RD][s];
        let sign = if plus { Outcome::Plus } else { Outcome::Minus };
        (site, PauliAxis::from_index(a).unwrap(), sign)
    });
    (
        bell,
        label.clone(),
        label,
        proptest::collection::vec(outcome, 0..2),
    )
        .prop_map(|(bell, la, lb, outs)| {
            let mut c = SelectionCriterion {
                bell,
                ..SelectionCriterion::default()
            }
            .with_labels(la, lb);
            for (site, axis, sign) in outs {
                c = c.with_outcome(site, axis, sign);
            }
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigensolver_reconstructs_and_is_orthonormal(seed in any::<u64>(), d in prop_oneof![Just(2usize), Just(4), Just(16)]) {
        let m = common::random_hermitian(&mut rng(seed), d);
        let spectrum = hermitian_eig(&m).unwrap();
        prop_assert!(spectrum.reconstruct().max_abs_diff(&m) <= 1e-10);
        prop_assert!(spectrum.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        for (i, u) in spectrum.eigenvectors.iter().enumerate() {
            for (j, v) in spectrum.eigenvectors.iter().enumerate() {
                let ip: num_complex::Complex<f64> = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ip - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn exact_moment_round_trip(seed in any::<u64>()) {
        let rho = common::random_density(&mut rng(seed), 4);
        let back = invert_probabilities(&exact_probabilities(rho.matrix())).unwrap();
        prop_assert!(back.max_abs_diff(rho.matrix()) <= 1e-12);
    }

    #[test]
    fn concurrence_and_negativity_agree(seed in any::<u64>(), rank in 1usize..=4) {
        let rho = common::random_low_rank_density(&mut rng(seed), rank);
        let c = concurrence(&rho).unwrap();
        let n = negativity(&rho).unwrap();
        // skip the numerically ambiguous boundary
        prop_assume!(c > 1e-6 || c == 0.0);
        prop_assume!(!(1e-12..=1e-6).contains(&n));
        prop_assert_eq!(c > 1e-6, n > 1e-6, "concurrence {} negativity {}", c, n);
    }

    #[test]
    fn chsh_violation_implies_npt(seed in any::<u64>(), rank in 1usize..=3) {
        let rho = common::random_low_rank_density(&mut rng(seed), rank);
        if chsh_max(&rho).unwrap() > 2.0 + 1e-9 {
            prop_assert!(negativity(&rho).unwrap() > 0.0);
        }
    }

    #[test]
    fn product_mixtures_are_ppt(seed in any::<u64>(), k in 1usize..8) {
        let rho = common::random_separable(&mut rng(seed), k);
        prop_assert!(ppt_min_eigenvalue(&rho).unwrap() >= -1e-10);
        prop_assert!(chsh_max(&rho).unwrap() <= 2.0 + 1e-9);
    }

    #[test]
    fn label_built_state_is_always_ppt(criterion in any_criterion()) {
        let (cfg, recs) = shared_records();
        if criterion.select(recs).next().is_some() {
            let (rho, weights) = ensemble_state_from_preps::<f64>(recs, cfg, &criterion).unwrap();
            prop_assert!(ppt_min_eigenvalue(&rho).unwrap() >= -1e-10);
            let total: f64 = weights.iter().map(|w| w.frequency).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn criterion_text_round_trips(criterion in any_criterion()) {
        let text = criterion.to_string();
        let back: SelectionCriterion = text.parse().unwrap();
        prop_assert_eq!(back.to_string(), text);
        let (_, recs) = shared_records();
        for r in recs.iter().take(200) {
            prop_assert_eq!(back.matches(r), criterion.matches(r));
        }
    }

    #[test]
    fn collapse_is_repeatable(seed in any::<u64>(), axis in 0usize..3, u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
        let rho = common::random_density(&mut rng(seed), 2);
        let m = ProjectiveMeasurement::new(pauli_projectors::<f64>(PauliAxis::from_index(axis).unwrap())).unwrap();
        let (k1, post) = measure_with_uniform(&rho, &m, u1).unwrap();
        prop_assert!((post.matrix().trace().re - 1.0).abs() < 1e-12);
        let (k2, again) = measure_with_uniform(&post, &m, u2).unwrap();
        prop_assert_eq!(k1, k2);
        prop_assert!(again.matrix().max_abs_diff(post.matrix()) < 1e-12);
    }

    #[test]
    fn runs_are_order_independent(seed in any::<u64>(), id in 0u64..1_000_000) {
        let cfg = ExperimentConfig::new(Scenario::Standard, 1, seed);
        let app = Apparatus::<f64>::new(&cfg).unwrap();
        let a = app.run(id).unwrap();
        let _ = app.run(id + 1).unwrap();
        prop_assert_eq!(a, app.run(id).unwrap());
    }

    #[test]
    fn record_json_round_trips(idx in 0usize..4_000) {
        let (_, recs) = shared_records();
        let json = serde_json::to_string(&recs[idx]).unwrap();
        let back: RunRecord = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &recs[idx]);
    }
}

#[test]
fn eigensolver_budget_suite() {
    let mut r = rng(2024);
    for dim in [2, 4, 16] {
        for _ in 0..100 {
            let m = common::random_hermitian(&mut r, dim);
            assert!(hermitian_eig(&m).unwrap().reconstruct().max_abs_diff(&m) <= 1e-10);
        }
    }
}

#[test]
fn replay_is_thread_count_independent() {
    let cfg = ExperimentConfig::new(Scenario::Pbr, 5_000, 3);
    let runs: Vec<Vec<RunRecord>> = [1, 3, 8]
        .iter()
        .map(|&t| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| run_experiment::<f64>(&cfg).unwrap())
        })
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
}

/// Each (axis, outcome) cell at every site has frequency 1/6: settings are
/// uniform and every single-qubit state met by a measurement is I/2.
#[test]
fn marginals_are_unbiased() {
    let cfg = ExperimentConfig::new(Scenario::Standard, 60_000, 5);
    let recs = run_experiment::<f64>(&cfg).unwrap();
    let n = recs.len() as f64;
    let p = 1.0 / 6.0;
    let sigma = (p * (1.0 - p) / n).sqrt();
    for site in [Site::PA, Site::PB, Site::RC, Site::RD] {
        let mut cells = [[0u64; 2]; 3];
        for r in &recs {
            let (axis, out) = site.read(r);
            cells[axis.index()][out.index()] += 1;
        }
        for c in cells.iter().flatten() {
            assert!(
                (*c as f64 / n - p).abs() < 4.0 * sigma,
                "{site:?} {cells:?}"
            );
        }
    }
}

/// Within a Bell sub-ensemble the same-axis R outcomes follow the Bell
/// correlations exactly, since R acts on the post-measurement state.
#[test]
fn post_stage_same_axis_correlations_are_exact() {
    let cfg = ExperimentConfig::new(Scenario::Standard, 20_000, 8);
    let recs = run_experiment::<f64>(&cfg).unwrap();
    for r in &recs {
        if r.r_c_axis == r.r_d_axis {
            let product = r.r_c_out.value() * r.r_d_out.value();
            assert_eq!(
                product,
                r.q_out.correlations()[r.r_c_axis.index()],
                "run {}",
                r.run_id
            );
        }
    }
}

#[test]
fn matrix_serde_keeps_trace() {
    let (cfg, recs) = shared_records();
    let (rho, _) = ensemble_state_from_preps::<f64>(recs, cfg, &SelectionCriterion::all()).unwrap();
    let json = serde_json::to_string(&rho).unwrap();
    let back: ComplexMatrix<f64> = serde_json::from_str(&json).unwrap();
    assert!((back.trace().re - 1.0).abs() < 1e-9);
}

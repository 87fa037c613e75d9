//! Study-level behaviour: optimization-error spread versus shot noise, and
//! the iteration envelope of the multi-seed protocol.

use vqt_core::ansatz::{build_vqc1, build_vqc2};
use vqt_core::diagnostics::{multi_seed_study, welford, MultiSeedConfig};
use vqt_core::engine::{Mode, OptimizeOptions, QvqtProblem};
use vqt_core::hubbard::{build_hamiltonian, Boundary, HubbardConfig};
use vqt_core::rng::mix_seed;
use vqt_core::statevector::{estimate_expectation_with_shots, StateVector};

fn cfg() -> HubbardConfig {
    HubbardConfig::new(2, 1.0, 0.8, 0.2, Boundary::Periodic).unwrap()
}

/// The spread of optimized free energies across initializations dominates
/// the statistical error of a 3000-shot estimate at one optimum.
#[test]
fn optimization_error_exceeds_shot_noise() {
    let config = cfg();
    let ms = MultiSeedConfig {
        layers1: 2,
        layers2: 2,
        n_seeds: 10,
        master_seed: 71,
        mode: Mode::Exact,
        opt: OptimizeOptions { budget: 120, compute_fidelity: false, ..Default::default() },
    };
    let rows = multi_seed_study(&config, &[1.0], &ms).unwrap();
    let opt_std = rows[0].free_energy.std;

    // shot-noise scale of F at a fixed parameter point: repeat a 3000-shot
    // energy estimate on one ensemble member and take its spread
    let problem = QvqtProblem::new(
        build_hamiltonian(&config).unwrap(),
        1.0,
        build_vqc1(4, 2, 1).unwrap(),
        build_vqc2(&config, 2, true).unwrap(),
        Mode::Exact,
        1e-12,
    )
    .unwrap();
    let theta2 = vqt_core::engine::InitStrategy::Gaussian { seed: 5 }.draw(problem.vqc2.n_params());
    let mut state = StateVector::basis_state(4, 3);
    problem.vqc2.apply_to(&mut state, &theta2).unwrap();
    let estimates: Vec<f64> = (0..20)
        .map(|i| {
            estimate_expectation_with_shots(
                &state,
                &problem.hamiltonian,
                3000,
                mix_seed(99, i),
            )
            .unwrap()
        })
        .collect();
    let (_, shot_var) = welford(&estimates);
    let shot_std = shot_var.sqrt();

    assert!(
        opt_std > shot_std,
        "optimization spread {opt_std:.4e} should exceed 3000-shot noise {shot_std:.4e}"
    );
}

/// Iteration counts of the multi-seed protocol stay within a loose envelope
/// around the reference magnitudes.
#[test]
fn multiseed_iteration_envelope() {
    let config = cfg();
    let ms = MultiSeedConfig {
        layers1: 4,
        layers2: 4,
        n_seeds: 10,
        master_seed: 13,
        mode: Mode::Exact,
        opt: OptimizeOptions { budget: 450, compute_fidelity: false, ..Default::default() },
    };
    let rows = multi_seed_study(&config, &[1.0, 5.25], &ms).unwrap();
    for row in &rows {
        assert!(
            (20.0..=500.0).contains(&row.iterations.mean),
            "beta={}: mean iterations {}",
            row.beta,
            row.iterations.mean
        );
        assert_eq!(row.n_seeds, 10);
    }
}

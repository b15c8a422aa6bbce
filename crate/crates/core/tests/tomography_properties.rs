use qpt_core::tomography::{
    enumerate_settings, expected_counts, linear_inversion, log_likelihood, mle_reconstruct,
    mle_reconstruct_with, outcome_probabilities, simulate_counts, simulate_noisy_chi, MleOptions,
};
use qpt_core::{choi_state, fidelity, ideal_chi, ChannelSpec, ComplexMatrix, ProcessMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense Born rule with explicitly expanded product projectors.
fn brute_force_probabilities(rho: &ComplexMatrix, bases: &[char]) -> Vec<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let eigvec = |b: char, outcome: usize| -> [C64; 2] {
        match (b, outcome) {
            ('X', 0) => [C64::new(h, 0.0), C64::new(h, 0.0)],
            ('X', 1) => [C64::new(h, 0.0), C64::new(-h, 0.0)],
            ('Y', 0) => [C64::new(h, 0.0), C64::new(0.0, h)],
            ('Y', 1) => [C64::new(h, 0.0), C64::new(0.0, -h)],
            ('Z', 0) => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            _ => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        }
    };
    let m = bases.len();
    (0..1usize << m)
        .map(|outcome| {
            let mut v = vec![C64::new(1.0, 0.0)];
            for (q, &b) in bases.iter().enumerate() {
                let bit = (outcome >> (m - 1 - q)) & 1;
                let e = eigvec(b, bit);
                v = v.iter().flat_map(|a| [a * e[0], a * e[1]]).collect();
            }
            rho.sandwich(&v, &v).re
        })
        .collect()
}

#[test]
fn born_rule_matches_dense_oracle_for_xxxx() {
    let choi = choi_state(&ChannelSpec::ControlledPhase { phi: 0.0 }).unwrap();
    let settings = enumerate_settings(2).unwrap();
    let xxxx = &settings[0];
    let p = outcome_probabilities(&choi, xxxx).unwrap();
    let oracle = brute_force_probabilities(&choi, &['X', 'X', 'X', 'X']);
    for (a, b) in p.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn born_rule_matches_oracle_for_every_single_qubit_setting() {
    let choi = choi_state(&ChannelSpec::GeneralizedAmplitudeDamping { eta: 0.35, gamma: 0.6 }).unwrap();
    for setting in enumerate_settings(1).unwrap() {
        let labels: Vec<char> = setting
            .bases()
            .iter()
            .map(|b| format!("{b:?}").chars().next().unwrap())
            .collect();
        let p = outcome_probabilities(&choi, &setting).unwrap();
        let oracle = brute_force_probabilities(&choi, &labels);
        for (a, b) in p.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn pure_bell_reconstruction_is_physical() {
    let spec = ChannelSpec::Depolarizing { p: 0.0 };
    let counts = simulate_counts(&spec, 1.0, 2000.0, 17).unwrap();
    let result = mle_reconstruct(&counts, 1).unwrap();
    let chi = result.chi.matrix();
    assert!((chi.trace().re - 1.0).abs() < 1e-12);
    assert!(chi.min_eigenvalue() >= -1e-14);
}

fn random_density(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let p = &g.adjoint() * &g;
    p.scale_real(1.0 / p.trace().re)
}

#[test]
fn multi_start_reaches_same_likelihood() {
    let spec = ChannelSpec::GeneralizedAmplitudeDamping { eta: 0.3, gamma: 0.7 };
    let counts = simulate_counts(&spec, 1.0, 2000.0, 99).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let values: Vec<f64> = (0..20)
        .map(|_| {
            let start = random_density(4, &mut rng);
            mle_reconstruct_with(&counts, 1, &MleOptions::default(), Some(&start))
                .unwrap()
                .log_likelihood
        })
        .collect();
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max - min < 1e-6, "spread {}", max - min);
}

#[test]
fn mle_beats_or_matches_linear_inversion_likelihood() {
    let spec = ChannelSpec::Depolarizing { p: 0.1 };
    let counts = simulate_counts(&spec, 0.1, 2000.0, 4).unwrap();
    let li = linear_inversion(&counts).unwrap().project_to_density();
    let result = mle_reconstruct(&counts, 1).unwrap();
    assert!(result.log_likelihood >= log_likelihood(&counts, &li).unwrap());
}

#[test]
fn linear_inversion_agrees_with_mle_at_high_counts() {
    let spec = ChannelSpec::Pauli { probs: [0.4, 0.25, 0.2, 0.15] };
    let counts = simulate_counts(&spec, 1000.0, 2000.0, 8).unwrap();
    assert!(counts.counts().iter().all(|&c| c > 1e4));
    let li = ProcessMatrix::project(1, &qpt_core::chi_from_choi(
        &linear_inversion(&counts).unwrap().project_to_density(),
        1,
    ).unwrap().into_matrix())
    .unwrap();
    let mle = mle_reconstruct(&counts, 1).unwrap().chi;
    assert!(fidelity(&li, &mle).unwrap() >= 1.0 - 1e-4);
}

#[test]
fn mean_fidelity_increases_with_signal() {
    let spec = ChannelSpec::Depolarizing { p: 0.3 };
    let ideal = ideal_chi(&spec).unwrap();
    let mut previous = 0.0;
    for k in [0.1, 1.0, 10.0, 100.0] {
        let mean: f64 = (0..50)
            .map(|seed| {
                let (noisy, _) = simulate_noisy_chi(&spec, k, 2000.0, seed).unwrap();
                fidelity(&noisy, &ideal).unwrap()
            })
            .sum::<f64>()
            / 50.0;
        assert!(mean > previous, "k={k}: {mean} <= {previous}");
        previous = mean;
    }
}

#[test]
fn noiseless_two_qubit_reconstruction() {
    let spec = ChannelSpec::ControlledPhase { phi: 2.0 };
    let counts = expected_counts(&spec, 1.0, 2000.0).unwrap();
    let result = mle_reconstruct(&counts, 2).unwrap();
    let f = fidelity(&result.chi, &ideal_chi(&spec).unwrap()).unwrap();
    assert!(f >= 1.0 - 1e-6, "{f}");
}

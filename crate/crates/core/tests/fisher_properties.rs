mod common;

use common::{eigen_formula_fisher, four_variance, random_clock, rng};
use proptest::prelude::*;
use tempus::channels::{random_covariant_channel, Channel};
use tempus::clock::ClassicalCircleClock;
use tempus::fisher::{classical_fisher, povm_snr, projectivize_povm, quantum_fisher};
use tempus::random;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fisher_matches_the_eigen_formula(seed in any::<u64>(), d in 2usize..=6) {
        let c = random_clock(d, seed);
        let f = quantum_fisher(&c);
        let oracle = eigen_formula_fisher(c.rho(), &c.hamiltonian().matrix());
        prop_assert!((f - oracle).abs() < 1e-8 * (1.0 + oracle), "{} vs {}", f, oracle);
        if seed % 2 == 0 {
            prop_assert!((f - four_variance(c.rho(), &c.hamiltonian().matrix())).abs() < 1e-8);
        }
    }

    #[test]
    fn fisher_is_time_invariant(seed in any::<u64>(), d in 2usize..=5, t in -10.0f64..10.0) {
        let c = random_clock(d, seed);
        prop_assert!((quantum_fisher(&c.evolve(t)) - quantum_fisher(&c)).abs() < 1e-8);
    }

    #[test]
    fn fisher_is_additive(seed_a in any::<u64>(), seed_b in any::<u64>(), second_dim in 2usize..=3) {
        let a = random_clock(2, seed_a);
        let b = random_clock(second_dim, seed_b);
        let joint = quantum_fisher(&a.tensor(&b));
        prop_assert!((joint - quantum_fisher(&a) - quantum_fisher(&b)).abs() < 1e-7);
    }

    #[test]
    fn covariant_channels_never_increase_fisher(seed in any::<u64>(), d_in in 2usize..=4, d_out in 2usize..=4, rank in 1usize..=3) {
        let mut r = rng(seed);
        let c = random_clock(d_in, seed);
        let h_out = random::random_integer_hamiltonian(d_out, 4, &mut r);
        let channel = random_covariant_channel(c.hamiltonian(), &h_out, rank, &mut r).unwrap();
        let out = channel.apply_clock(&c).unwrap();
        prop_assert!(quantum_fisher(&out) <= quantum_fisher(&c) + 1e-8);
    }

    #[test]
    fn projective_dilation_never_lowers_snr(seed in any::<u64>(), d in 2usize..=4, k in 2usize..=5) {
        let mut r = rng(seed);
        let c = random_clock(d, seed);
        let outcomes: Vec<f64> = (0..k).map(|i| i as f64 - 0.7 * (seed % 5) as f64).collect();
        let povm = random::random_povm(d, outcomes, &mut r).unwrap();
        let snr = povm_snr(&c, &povm);
        let projective = projectivize_povm(&povm).unwrap();
        prop_assert!(projective.is_projective(1e-8));
        if let (Ok(snr), Ok(dilated)) = (snr, povm_snr(&c, &projective)) {
            prop_assert!(dilated >= snr - 1e-10, "{} < {}", dilated, snr);
            prop_assert!(dilated <= quantum_fisher(&c) + 1e-8);
        }
    }

    #[test]
    fn classical_fisher_is_rotation_invariant(center in 0.0f64..1.0, sigma in 0.03f64..0.2, t in -3.0f64..3.0) {
        let c = ClassicalCircleClock::wrapped_gaussian(1024, center, sigma, 1.0).unwrap();
        let f = classical_fisher(&c);
        prop_assert!((classical_fisher(&c.evolve(t)) / f - 1.0).abs() < 1e-6);
    }
}

mod common;

use common::{random_clock, rng};
use proptest::prelude::*;
use tempus::channels::{
    c2q_prepare, canonical_phase_povm_ladder, covariance_residual, q2c_transfer, random_covariant_channel, twirl_channel,
    Channel,
};
use tempus::clock::HamiltonianSpec;
use tempus::fisher::quantum_fisher;
use tempus::linalg::{self, c64, CMatrix};
use tempus::random;

/// Kraus operators of a random (non-covariant) channel: columns of a
/// random isometry cut into blocks.
fn random_kraus(d_in: usize, d_out: usize, count: usize, seed: u64) -> Vec<CMatrix> {
    let count = count.max(d_in.div_ceil(d_out));
    let u = random::random_unitary(d_out * count, &mut rng(seed));
    (0..count).map(|k| u.view((k * d_out, 0), (d_out, d_in)).into_owned()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_channels_are_cp_tp_and_covariant(seed in any::<u64>(), d_in in 2usize..=4, d_out in 2usize..=4, rank in 1usize..=3) {
        let mut r = rng(seed);
        let h_in = random::random_integer_hamiltonian(d_in, 4, &mut r);
        let h_out = random::random_integer_hamiltonian(d_out, 4, &mut r);
        let channel = random_covariant_channel(&h_in, &h_out, rank, &mut r).unwrap();
        prop_assert!(channel.psd_residual() < 1e-8);
        prop_assert!(channel.tp_residual() < 1e-8);
        let rho = random::random_density(d_in, &mut r);
        let times: Vec<f64> = (0..16).map(|k| 0.37 * k as f64 - 2.0).collect();
        prop_assert!(covariance_residual(&channel, &rho, &times).unwrap() < 1e-8);
        let out = channel.apply(&rho).unwrap();
        prop_assert!((linalg::trace(&out).re - 1.0).abs() < 1e-9);
        prop_assert!(linalg::min_eigenvalue(&linalg::hermitize(&out)) > -1e-10);
        let via_kraus = channel.to_kraus().apply(&rho).unwrap();
        prop_assert!(linalg::max_abs(&(via_kraus - out)) < 1e-9);
    }

    #[test]
    fn twirling_is_idempotent_and_makes_channels_covariant(seed in any::<u64>(), d_in in 2usize..=3, d_out in 2usize..=3, count in 1usize..=3) {
        let h_in = HamiltonianSpec::ladder(d_in);
        let h_out = HamiltonianSpec::ladder(d_out);
        let kraus = random_kraus(d_in, d_out, count, seed);
        let once = twirl_channel(&kraus, &h_in, &h_out).unwrap();
        let ops: Vec<CMatrix> = once.to_kraus().ops().iter().map(|op| op.matrix.clone()).collect();
        let twice = twirl_channel(&ops, &h_in, &h_out).unwrap();
        for (a, b) in once.blocks().iter().zip(twice.blocks()) {
            prop_assert!(linalg::max_abs(&(a - b)) < 1e-10);
        }
        let rho = random::random_density(d_in, &mut rng(seed ^ 1));
        prop_assert!(covariance_residual(&once, &rho, &[0.1, 0.5, 1.3]).unwrap() < 1e-9);
        prop_assert!(once.tp_residual() < 1e-9);
    }

    #[test]
    fn measure_and_prepare_never_gains_information(seed in any::<u64>(), d in 2usize..=4) {
        let clock = random_clock(d, seed).with_hamiltonian(HamiltonianSpec::ladder(d));
        let clock = match clock { Ok(c) => c, Err(_) => return Ok(()) };
        let povm = canonical_phase_povm_ladder(d, 64).unwrap();
        let reading = q2c_transfer(&clock, &povm).unwrap();
        let seed_clock = random::random_pure_clock(HamiltonianSpec::ladder(d), &mut rng(seed ^ 7)).unwrap();
        let prepared = c2q_prepare(&reading, &seed_clock).unwrap();
        prop_assert!(quantum_fisher(&prepared) <= quantum_fisher(&clock) + 1e-6);
        prop_assert!((linalg::trace(prepared.rho()) - c64(1.0, 0.0)).norm() < 1e-9);
    }
}

//! Seeded random states, unitaries and clocks for sampling experiments.

use crate::clock::{HamiltonianSpec, QuantumClock};
use crate::error::Result;
use crate::fisher::Povm;
use crate::linalg::{self, c64, CMatrix, CVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> num_complex::Complex64 {
    c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random unit vector.
pub fn random_pure_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(d, |_, _| gaussian(rng));
    let norm = v.norm();
    v / c64(norm, 0.0)
}

/// Haar-random unitary (QR of a Ginibre matrix with the phases of R fixed).
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMatrix::from_diagonal(&CVector::from_fn(d, |i, _| {
        let z = r[(i, i)];
        if z.norm() > 0.0 { z / z.norm() } else { c64(1.0, 0.0) }
    }));
    q * phases
}

/// Full-rank random density matrix G G† / tr(G G†) with Ginibre G.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let rho = &g * g.adjoint();
    let tr = linalg::trace(&rho).re;
    linalg::hermitize(&(rho * c64(1.0 / tr, 0.0)))
}

/// Pure clock with a Haar-random state.
pub fn random_pure_clock<R: Rng + ?Sized>(hamiltonian: HamiltonianSpec, rng: &mut R) -> Result<QuantumClock> {
    let psi = random_pure_vector(hamiltonian.dim(), rng);
    QuantumClock::pure(&psi, hamiltonian)
}

/// Mixed full-rank clock.
pub fn random_mixed_clock<R: Rng + ?Sized>(hamiltonian: HamiltonianSpec, rng: &mut R) -> Result<QuantumClock> {
    let rho = random_density(hamiltonian.dim(), rng);
    QuantumClock::new(rho, hamiltonian)
}

/// POVM with `outcomes.len()` random effects S^{−1/2} G_k S^{−1/2}, where
/// G_k are Wishart samples and S = Σ G_k.
pub fn random_povm<R: Rng + ?Sized>(d: usize, outcomes: Vec<f64>, rng: &mut R) -> Result<Povm> {
    let raw: Vec<CMatrix> = outcomes.iter().map(|_| random_density(d, rng)).collect();
    let total = raw.iter().fold(CMatrix::zeros(d, d), |acc, g| acc + g);
    let inv_sqrt = linalg::hermitian_map(&total, |v| 1.0 / v.sqrt());
    let effects = raw.iter().map(|g| linalg::hermitize(&(&inv_sqrt * g * &inv_sqrt))).collect();
    Povm::new(outcomes, effects)
}

/// Integer spectrum with levels drawn from 0..=max_level (repeats allowed).
pub fn random_integer_hamiltonian<R: Rng + ?Sized>(d: usize, max_level: i64, rng: &mut R) -> HamiltonianSpec {
    let levels = (0..d).map(|_| rng.random_range(0..=max_level) as f64).collect();
    HamiltonianSpec::diagonal(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_and_density_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(5, &mut rng);
        assert!(linalg::unitary_residual(&u) < 1e-12);
        let rho = random_density(5, &mut rng);
        assert!((linalg::trace(&rho).re - 1.0).abs() < 1e-12);
        assert!(linalg::min_eigenvalue(&rho) > 0.0);
    }

    #[test]
    fn equal_seeds_give_equal_samples() {
        let a = random_pure_vector(4, &mut ChaCha8Rng::seed_from_u64(9));
        let b = random_pure_vector(4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}

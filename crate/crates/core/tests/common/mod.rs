#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempus::clock::{HamiltonianSpec, QuantumClock};
use tempus::linalg::{self, c64, CMatrix};
use tempus::random;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer spectrum in a Haar-random eigenbasis.
pub fn rotated_integer_hamiltonian(d: usize, max_level: i64, rng: &mut ChaCha8Rng) -> HamiltonianSpec {
    let diagonal = random::random_integer_hamiltonian(d, max_level, rng);
    HamiltonianSpec::new(diagonal.eigenvalues().to_vec(), random::random_unitary(d, rng)).unwrap()
}

/// Pure or full-rank mixed clock, chosen by the low bit of `seed`.
pub fn random_clock(d: usize, seed: u64) -> QuantumClock {
    let mut r = rng(seed);
    let h = rotated_integer_hamiltonian(d, 4, &mut r);
    if seed % 2 == 0 {
        random::random_pure_clock(h, &mut r).unwrap()
    } else {
        random::random_mixed_clock(h, &mut r).unwrap()
    }
}

/// 4·Var(H) computed from the eigen-decomposition of ρ, independent of the
/// clock's own moment helpers.
pub fn four_variance(rho: &CMatrix, h: &CMatrix) -> f64 {
    let mean = (rho * h).trace().re;
    let second = (rho * h * h).trace().re;
    4.0 * (second - mean * mean)
}

/// Fisher information from the eigen-decomposition formula
/// 2 Σ (λ_i − λ_j)²/(λ_i + λ_j) |⟨i|H|j⟩|².
pub fn eigen_formula_fisher(rho: &CMatrix, h: &CMatrix) -> f64 {
    let (values, vectors) = linalg::eigh(rho);
    let h_eig = vectors.adjoint() * h * &vectors;
    let mut total = 0.0;
    for i in 0..values.len() {
        for j in 0..values.len() {
            let s = values[i] + values[j];
            if s > 1e-12 {
                total += 2.0 * (values[i] - values[j]).powi(2) / s * h_eig[(i, j)].norm_sqr();
            }
        }
    }
    total
}

pub fn plus_qubit() -> QuantumClock {
    QuantumClock::pure_real(&[1.0, 1.0], HamiltonianSpec::ladder(2)).unwrap()
}

pub fn uniform_clock(d: usize) -> QuantumClock {
    QuantumClock::pure_real(&vec![1.0; d], HamiltonianSpec::ladder(d)).unwrap()
}

pub fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m * c64(s, 0.0)
}

//! Quantum and classical clocks and their time evolution.
//!
//! A quantum clock is a state together with the Hamiltonian that moves it,
//! `ρ_t = exp(−iHt) ρ exp(iHt)`. A classical circle clock is a probability
//! density on a uniform grid over one period of the unit circle, rotating
//! with angular frequency ω.
//!
//! Channel and quasi-order routines require integer Hamiltonian spectra, so
//! every clock taking part in them is periodic with period 2π.

use crate::error::{Result, TempusError};
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::spectral;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const STATE_TOLERANCE: f64 = 1e-10;
pub const UNITARY_TOLERANCE: f64 = 1e-10;
/// Negative eigenvalues above this are round-off and left alone.
const CLIP_THRESHOLD: f64 = 1e-12;
pub const CLASSICAL_NORM_TOLERANCE: f64 = 1e-9;
pub const COHERENT_TAIL_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_CLASSICAL_GRID: usize = 1024;

/// Spectral form of a Hamiltonian: eigenvalues and the unitary whose columns
/// are the matching eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::HamiltonianJson", into = "crate::io::HamiltonianJson")]
pub struct HamiltonianSpec {
    eigenvalues: Vec<f64>,
    basis: CMatrix,
}

impl HamiltonianSpec {
    pub fn new(eigenvalues: Vec<f64>, basis: CMatrix) -> Result<Self> {
        if basis.nrows() != basis.ncols() {
            return Err(TempusError::NotSquare { rows: basis.nrows(), cols: basis.ncols() });
        }
        if basis.nrows() != eigenvalues.len() {
            return Err(TempusError::DimensionMismatch { expected: eigenvalues.len(), found: basis.nrows() });
        }
        let residual = linalg::unitary_residual(&basis);
        if residual > UNITARY_TOLERANCE {
            return Err(TempusError::NotUnitary { residual });
        }
        Ok(Self { eigenvalues, basis })
    }

    /// Hamiltonian diagonal in the computational basis.
    pub fn diagonal(eigenvalues: Vec<f64>) -> Self {
        let d = eigenvalues.len();
        Self { eigenvalues, basis: linalg::identity(d) }
    }

    /// `H|n⟩ = n|n⟩` for n = 0..d.
    pub fn ladder(d: usize) -> Self {
        Self::diagonal((0..d).map(|n| n as f64).collect())
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn has_identity_basis(&self) -> bool {
        linalg::max_abs(&(&self.basis - linalg::identity(self.dim()))) == 0.0
    }

    pub fn matrix(&self) -> CMatrix {
        linalg::reconstruct(&self.eigenvalues, &self.basis)
    }

    /// exp(−iHt)
    pub fn propagator(&self, t: f64) -> CMatrix {
        let phases: Vec<Complex64> =
            self.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect();
        let mut scaled = self.basis.clone();
        for (j, phase) in phases.iter().enumerate() {
            for i in 0..self.dim() {
                scaled[(i, j)] *= phase;
            }
        }
        scaled * self.basis.adjoint()
    }

    /// Integer energy levels, or an error naming the first non-integer one.
    pub fn integer_levels(&self) -> Result<Vec<i64>> {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                if linalg::is_real_integer(value) {
                    Ok(value.round() as i64)
                } else {
                    Err(TempusError::NonIntegerSpectrum { index, value })
                }
            })
            .collect()
    }

    /// Express an operator in the energy eigenbasis: U† M U.
    pub fn to_energy_basis(&self, m: &CMatrix) -> CMatrix {
        self.basis.adjoint() * m * &self.basis
    }

    /// Inverse of [`to_energy_basis`](Self::to_energy_basis).
    pub fn from_energy_basis(&self, m: &CMatrix) -> CMatrix {
        &self.basis * m * self.basis.adjoint()
    }

    /// H ⊗ 1 + 1 ⊗ H'
    pub fn tensor_sum(&self, other: &Self) -> Self {
        let eigenvalues = self
            .eigenvalues
            .iter()
            .flat_map(|a| other.eigenvalues.iter().map(move |b| a + b))
            .collect();
        Self { eigenvalues, basis: linalg::kron(&self.basis, &other.basis) }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            eigenvalues: self.eigenvalues.iter().map(|e| e * factor).collect(),
            basis: self.basis.clone(),
        }
    }
}

/// A state ρ together with its Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::RawQuantumClock", into = "crate::io::RawQuantumClock")]
pub struct QuantumClock {
    rho: CMatrix,
    hamiltonian: HamiltonianSpec,
}

/// One invariant check with its measured residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self { name: name.to_owned(), passed: residual <= tolerance, residual, tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn from_checks(checks: Vec<Check>) -> Self {
        Self { valid: checks.iter().all(|c| c.passed), checks }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl QuantumClock {
    /// Builds a clock after checking the state invariants. The matrix is
    /// hermitized; eigenvalues in `[−1e−10, −1e−12)` are clipped to zero and
    /// the trace renormalized. Otherwise the entries are kept bit for bit,
    /// so constructing from an already constructed state is the identity.
    pub fn new(rho: CMatrix, hamiltonian: HamiltonianSpec) -> Result<Self> {
        let clock = Self::unchecked(rho, hamiltonian)?;
        let residual = linalg::hermitian_residual(&clock.rho);
        if residual > 1e-8 {
            return Err(TempusError::NotHermitian { residual });
        }
        let rho = linalg::hermitize(&clock.rho);
        let (values, vectors) = linalg::eigh(&rho);
        let min = values.first().copied().unwrap_or(0.0);
        if min < -STATE_TOLERANCE {
            return Err(TempusError::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        let tr = linalg::trace(&rho).re;
        if (tr - 1.0).abs() > STATE_TOLERANCE {
            return Err(TempusError::InvalidState(format!("trace {tr:.12} differs from 1")));
        }
        let rho = if min < -CLIP_THRESHOLD {
            let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            linalg::hermitize(&linalg::reconstruct(&clipped.iter().map(|v| v / total).collect::<Vec<_>>(), &vectors))
        } else {
            rho
        };
        Ok(Self { rho, hamiltonian: clock.hamiltonian })
    }

    /// Pairs a matrix with a Hamiltonian checking only the dimensions, so
    /// that invalid states can still be inspected with [`validate`](Self::validate).
    pub fn unchecked(rho: CMatrix, hamiltonian: HamiltonianSpec) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(TempusError::NotSquare { rows: rho.nrows(), cols: rho.ncols() });
        }
        if rho.nrows() != hamiltonian.dim() {
            return Err(TempusError::DimensionMismatch { expected: hamiltonian.dim(), found: rho.nrows() });
        }
        Ok(Self { rho, hamiltonian })
    }

    /// Pure clock |ψ⟩⟨ψ|; `psi` is normalized here.
    pub fn pure(psi: &CVector, hamiltonian: HamiltonianSpec) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(TempusError::InvalidState("zero vector".into()));
        }
        let v = psi / c64(norm, 0.0);
        Self::new(linalg::outer(&v), hamiltonian)
    }

    /// Pure clock from real amplitudes.
    pub fn pure_real(amplitudes: &[f64], hamiltonian: HamiltonianSpec) -> Result<Self> {
        let psi = CVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|&a| c64(a, 0.0)));
        Self::pure(&psi, hamiltonian)
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn validate(&self) -> ValidationReport {
        let hermitian = linalg::hermitian_residual(&self.rho);
        let herm = linalg::hermitize(&self.rho);
        let min = linalg::min_eigenvalue(&herm);
        let trace = (linalg::trace(&self.rho) - linalg::ONE).norm();
        let unitary = linalg::unitary_residual(self.hamiltonian.basis());
        ValidationReport::from_checks(vec![
            Check::new("hermitian", hermitian, STATE_TOLERANCE),
            Check::new("positivity", (-min).max(0.0), STATE_TOLERANCE),
            Check::new("trace", trace, STATE_TOLERANCE),
            Check::new("basis_unitary", unitary, UNITARY_TOLERANCE),
        ])
    }

    /// The clock after time `t`.
    pub fn evolve(&self, t: f64) -> Self {
        let u = self.hamiltonian.propagator(t);
        Self { rho: &u * &self.rho * u.adjoint(), hamiltonian: self.hamiltonian.clone() }
    }

    /// ρ̇ = i[ρ, H]
    pub fn rho_dot(&self) -> CMatrix {
        linalg::commutator(&self.rho, &self.hamiltonian.matrix()) * linalg::I
    }

    /// max |[ρ, H]|; zero for clocks carrying no timing information.
    pub fn stationarity_residual(&self) -> f64 {
        linalg::max_abs(&linalg::commutator(&self.rho, &self.hamiltonian.matrix()))
    }

    pub fn energy_mean(&self) -> f64 {
        linalg::trace_product_re(&self.rho, &self.hamiltonian.matrix())
    }

    pub fn energy_second_moment(&self) -> f64 {
        let h = self.hamiltonian.matrix();
        linalg::trace_product_re(&self.rho, &(&h * &h))
    }

    pub fn energy_variance(&self) -> f64 {
        self.energy_second_moment() - self.energy_mean().powi(2)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product_re(&self.rho, &self.rho)
    }

    /// (ρ ⊗ σ, H ⊗ 1 + 1 ⊗ H')
    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            rho: linalg::kron(&self.rho, &other.rho),
            hamiltonian: self.hamiltonian.tensor_sum(&other.hamiltonian),
        }
    }

    /// Same state with a different Hamiltonian of equal dimension.
    pub fn with_hamiltonian(&self, hamiltonian: HamiltonianSpec) -> Result<Self> {
        Self::unchecked(self.rho.clone(), hamiltonian)
    }
}

/// Truncated Glauber state Σₙ e^{−|α|²/2} αⁿ/√(n!) |n⟩ on levels `0..cutoff`
/// with `H|n⟩ = n|n⟩`, renormalized after truncation.
pub fn coherent_state(alpha: Complex64, cutoff: usize) -> Result<QuantumClock> {
    if cutoff == 0 {
        return Err(TempusError::InvalidArgument("cutoff must be at least 1".into()));
    }
    let mut amplitudes = Vec::with_capacity(cutoff);
    let mut f = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..cutoff {
        if n > 0 {
            f = f * alpha / (n as f64).sqrt();
        }
        amplitudes.push(f);
    }
    let kept: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let tail_mass = (1.0 - kept).max(0.0);
    if tail_mass >= COHERENT_TAIL_THRESHOLD {
        return Err(TempusError::CutoffTooSmall { cutoff, tail_mass });
    }
    QuantumClock::pure(&CVector::from_vec(amplitudes), HamiltonianSpec::ladder(cutoff))
}

/// Probability density on the grid t_k = k/N over one period, rotating with
/// angular frequency `omega` (radians per unit time).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::RawClassicalClock", into = "crate::io::RawClassicalClock")]
pub struct ClassicalCircleClock {
    density: Vec<f64>,
    omega: f64,
}

impl ClassicalCircleClock {
    pub fn new(density: Vec<f64>, omega: f64) -> Result<Self> {
        if density.is_empty() {
            return Err(TempusError::InvalidArgument("empty density grid".into()));
        }
        if let Some((k, &p)) = density.iter().enumerate().find(|(_, p)| **p < 0.0 || !p.is_finite()) {
            return Err(TempusError::InvalidState(format!("density {p} at grid point {k}")));
        }
        let clock = Self { density, omega };
        let residual = (clock.mass() - 1.0).abs();
        if residual > CLASSICAL_NORM_TOLERANCE {
            return Err(TempusError::InvalidState(format!("normalization residual {residual:.3e}")));
        }
        Ok(clock)
    }

    /// Normalizes an arbitrary nonnegative profile.
    pub fn from_profile(profile: Vec<f64>, omega: f64) -> Result<Self> {
        let n = profile.len() as f64;
        let total: f64 = profile.iter().sum::<f64>() / n;
        if total <= 0.0 {
            return Err(TempusError::InvalidState("profile has no mass".into()));
        }
        Self::new(profile.into_iter().map(|p| p / total).collect(), omega)
    }

    pub fn uniform(n: usize, omega: f64) -> Self {
        Self { density: vec![1.0; n], omega }
    }

    /// All mass on grid point `index` (a density of height N there).
    pub fn grid_delta(n: usize, index: usize, omega: f64) -> Self {
        let mut density = vec![0.0; n];
        density[index % n] = n as f64;
        Self { density, omega }
    }

    /// Wrapped normal density with mean `center` and standard deviation
    /// `sigma`, both in periods.
    pub fn wrapped_gaussian(n: usize, center: f64, sigma: f64, omega: f64) -> Result<Self> {
        if sigma <= 0.0 {
            return Err(TempusError::InvalidArgument("sigma must be positive".into()));
        }
        let images = (8.0 * sigma).ceil() as i64 + 1;
        let profile = (0..n)
            .map(|k| {
                let x = k as f64 / n as f64 - center;
                (-images..=images)
                    .map(|m| {
                        let z = (x + m as f64) / sigma;
                        (-0.5 * z * z).exp()
                    })
                    .sum()
            })
            .collect();
        Self::from_profile(profile, omega)
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn grid_size(&self) -> usize {
        self.density.len()
    }

    /// Pointer speed in periods per unit time.
    pub fn velocity(&self) -> f64 {
        self.omega / (2.0 * PI)
    }

    /// (1/N) Σ p(t_k)
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() / self.density.len() as f64
    }

    pub fn evolve(&self, t: f64) -> Self {
        let n = self.grid_size();
        let shift = self.velocity() * t;
        let bins = shift * n as f64;
        let density = if (bins - bins.round()).abs() < 1e-12 {
            let b = (bins.round() as i64).rem_euclid(n as i64) as usize;
            let mut out = vec![0.0; n];
            for (k, &p) in self.density.iter().enumerate() {
                out[(k + b) % n] = p;
            }
            out
        } else {
            spectral::circular_shift(&self.density, shift)
        };
        Self { density, omega: self.omega }
    }
}

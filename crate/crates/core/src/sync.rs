//! Synchronism: a bipartite state invariant under the joint evolution
//! α_t ⊗ β_t, which carries only relative time between the two parties.
//!
//! Synchronisms are compared through the clock (ρ, −H_A⊗1 + 1⊗H_B), whose
//! generator drives the relative time. The half-speed generator
//! (−H_A⊗1 + 1⊗H_B)/2 describes the same physics; its Fisher information is
//! smaller by exactly 4.

use crate::clock::{Check, ClassicalCircleClock, HamiltonianSpec, QuantumClock, ValidationReport};
use crate::error::{Result, TempusError};
use crate::fisher;
use crate::linalg::{self, CMatrix};
use crate::order::{self, OrderVerdict};
use serde::{Deserialize, Serialize};

pub const STATIONARITY_TOLERANCE: f64 = 1e-8;
/// Total energies closer than this count as equal when twirling.
const ENERGY_MATCH: f64 = 1e-9;

/// Joint state with the two local Hamiltonians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SynchronismJson", into = "SynchronismJson")]
pub struct Synchronism {
    rho: CMatrix,
    h_a: HamiltonianSpec,
    h_b: HamiltonianSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynchronismJson {
    pub rho: crate::io::MatrixJson,
    pub h_a: HamiltonianSpec,
    pub h_b: HamiltonianSpec,
}

impl From<Synchronism> for SynchronismJson {
    fn from(s: Synchronism) -> Self {
        Self { rho: (&s.rho).into(), h_a: s.h_a, h_b: s.h_b }
    }
}

impl TryFrom<SynchronismJson> for Synchronism {
    type Error = TempusError;

    fn try_from(j: SynchronismJson) -> Result<Self> {
        Synchronism::unchecked(j.rho.try_into()?, j.h_a, j.h_b)
    }
}

impl Synchronism {
    /// Checked constructor: valid density matrix, stationary under α_t⊗β_t.
    pub fn new(rho: CMatrix, h_a: HamiltonianSpec, h_b: HamiltonianSpec) -> Result<Self> {
        let s = Self::unchecked(rho, h_a, h_b)?;
        s.joint_clock()?;
        let residual = s.stationarity_residual();
        if residual >= STATIONARITY_TOLERANCE {
            return Err(TempusError::NotStationary { residual });
        }
        Ok(s)
    }

    /// Checks dimensions only.
    pub fn unchecked(rho: CMatrix, h_a: HamiltonianSpec, h_b: HamiltonianSpec) -> Result<Self> {
        let d = h_a.dim() * h_b.dim();
        if rho.nrows() != rho.ncols() {
            return Err(TempusError::NotSquare { rows: rho.nrows(), cols: rho.ncols() });
        }
        if rho.nrows() != d {
            return Err(TempusError::DimensionMismatch { expected: d, found: rho.nrows() });
        }
        Ok(Self { rho, h_a, h_b })
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn h_a(&self) -> &HamiltonianSpec {
        &self.h_a
    }

    pub fn h_b(&self) -> &HamiltonianSpec {
        &self.h_b
    }

    /// (ρ, H_A⊗1 + 1⊗H_B)
    pub fn joint_clock(&self) -> Result<QuantumClock> {
        QuantumClock::new(self.rho.clone(), self.h_a.tensor_sum(&self.h_b))
    }

    /// max |[ρ, H_A⊗1 + 1⊗H_B]|
    pub fn stationarity_residual(&self) -> f64 {
        let h = self.h_a.tensor_sum(&self.h_b).matrix();
        linalg::max_abs(&linalg::commutator(&self.rho, &h))
    }
}

/// Density-matrix checks plus the stationarity commutator.
pub fn validate_synchronism(s: &Synchronism) -> ValidationReport {
    let clock = QuantumClock::unchecked(s.rho.clone(), s.h_a.tensor_sum(&s.h_b)).expect("dimensions checked");
    let mut checks = clock.validate().checks;
    checks.push(Check::new("stationarity", s.stationarity_residual(), STATIONARITY_TOLERANCE));
    ValidationReport::from_checks(checks)
}

/// −H_A⊗1 + 1⊗H_B
pub fn relative_generator(h_a: &HamiltonianSpec, h_b: &HamiltonianSpec) -> HamiltonianSpec {
    h_a.scaled(-1.0).tensor_sum(h_b)
}

/// The relative-time clock (ρ, −H_A⊗1 + 1⊗H_B).
pub fn sync_to_clock(s: &Synchronism) -> Result<QuantumClock> {
    let report = validate_synchronism(s);
    if !report.valid {
        let failed = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ");
        return Err(TempusError::InvalidState(format!("not a synchronism: {failed}")));
    }
    QuantumClock::new(s.rho.clone(), relative_generator(&s.h_a, &s.h_b))
}

/// Fisher information of the relative-time clock.
pub fn relative_fisher(s: &Synchronism) -> Result<f64> {
    Ok(fisher::quantum_fisher(&sync_to_clock(s)?))
}

/// Period average of α_t⊗β_t applied to ρ: removes coherences between
/// different total energies.
pub fn twirl_joint(rho: &CMatrix, h_a: &HamiltonianSpec, h_b: &HamiltonianSpec) -> Result<Synchronism> {
    h_a.integer_levels()?;
    h_b.integer_levels()?;
    let total = h_a.tensor_sum(h_b);
    if rho.nrows() != total.dim() || rho.ncols() != total.dim() {
        return Err(TempusError::DimensionMismatch { expected: total.dim(), found: rho.nrows() });
    }
    let energies = total.eigenvalues();
    let rho_e = total.to_energy_basis(rho);
    let dephased = CMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| {
        if (energies[i] - energies[j]).abs() < ENERGY_MATCH { rho_e[(i, j)] } else { linalg::ZERO }
    });
    Synchronism::new(linalg::hermitize(&total.from_energy_basis(&dephased)), h_a.clone(), h_b.clone())
}

/// Decides s1 ≥ s2 by comparing their relative-time clocks.
pub fn sync_order(s1: &Synchronism, s2: &Synchronism, tol: f64) -> Result<OrderVerdict> {
    order::order_feasible(&sync_to_clock(s1)?, &sync_to_clock(s2)?, tol)
}

/// Joint pointer density p(a, b) = q((a − b) mod N)/N of two classical
/// circle clocks whose readings differ by a q-distributed offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSync {
    pub grid_size: usize,
    pub omega: f64,
    /// Row-major p(a, b), a = Alice's bin, b = Bob's bin; sums to 1.
    pub joint: Vec<f64>,
}

pub fn classical_sync(q: &ClassicalCircleClock) -> ClassicalSync {
    let n = q.grid_size();
    // The clock stores a density per unit period; bin masses are q/n.
    let mass: Vec<f64> = q.density().iter().map(|v| v / n as f64).collect();
    let joint = (0..n * n).map(|k| mass[(k / n + n - k % n) % n] / n as f64).collect();
    ClassicalSync { grid_size: n, omega: q.omega(), joint }
}

impl ClassicalSync {
    pub fn p(&self, a: usize, b: usize) -> f64 {
        self.joint[a * self.grid_size + b]
    }

    pub fn alice_marginal(&self) -> Vec<f64> {
        let n = self.grid_size;
        (0..n).map(|a| (0..n).map(|b| self.p(a, b)).sum()).collect()
    }

    pub fn bob_marginal(&self) -> Vec<f64> {
        let n = self.grid_size;
        (0..n).map(|b| (0..n).map(|a| self.p(a, b)).sum()).collect()
    }

    /// Largest deviation of either marginal from 1/N.
    pub fn marginal_uniformity_residual(&self) -> f64 {
        let uniform = 1.0 / self.grid_size as f64;
        self.alice_marginal().into_iter().chain(self.bob_marginal()).map(|m| (m - uniform).abs()).fold(0.0, f64::max)
    }

    /// Bob's pointer after Alice's reading is reset to the true time and
    /// Bob shifts his pointer by the same amount: the density of a − b.
    pub fn bob_pointer_after_protocol(&self) -> Result<ClassicalCircleClock> {
        let n = self.grid_size;
        let mass: Vec<f64> = (0..n).map(|k| (0..n).map(|b| self.p((b + k) % n, b)).sum::<f64>()).collect();
        ClassicalCircleClock::new(mass.iter().map(|m| m * n as f64).collect(), self.omega)
    }
}

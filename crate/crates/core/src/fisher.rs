//! Fisher timing information.
//!
//! For a quantum clock the optimal timing observable is the symmetric
//! logarithmic derivative `L` solving `(ρL + Lρ)/2 = ρ̇`, and the Fisher
//! timing information is `F = tr(ρ̇ L)`. For a classical circle clock it is
//! the ordinary Fisher information `∫ ṗ²/p` of the rotating density.
//!
//! The squared Bures distance between `ρ` and `ρ_dt` is `2 − 2 f(ρ, ρ_dt)`
//! with `f` the root fidelity `tr|√ρ₁ √ρ₂|`. Measured with
//! [`bures_fisher_constant`] it behaves as `c · F · dt²` with `c = 1/4`.

use crate::clock::{ClassicalCircleClock, QuantumClock};
use crate::error::{Result, TempusError};
use crate::linalg::{self, c64, CMatrix};
use crate::spectral;

/// Relative support cutoff for the symmetric logarithmic derivative.
pub const SLD_SUPPORT_CUTOFF: f64 = 1e-10;
/// Density floor below which classical bins are ignored.
pub const CLASSICAL_DENSITY_FLOOR: f64 = 1e-12;
pub const POVM_COMPLETENESS_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_BURES_DT: f64 = 1e-4;

/// A Hermitian observable read on a clock, with its drift `tr(ρ̇ A)` and
/// variance in the clock state.
#[derive(Clone, Debug)]
pub struct TimingObservable {
    pub matrix: CMatrix,
    pub drift: f64,
    pub variance: f64,
}

impl TimingObservable {
    pub fn new(clock: &QuantumClock, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != clock.dim() || matrix.ncols() != clock.dim() {
            return Err(TempusError::DimensionMismatch { expected: clock.dim(), found: matrix.nrows() });
        }
        let residual = linalg::hermitian_residual(&matrix);
        if residual > 1e-9 {
            return Err(TempusError::NotHermitian { residual });
        }
        let drift = linalg::trace_product_re(&clock.rho_dot(), &matrix);
        let mean = linalg::trace_product_re(clock.rho(), &matrix);
        let second = linalg::trace_product_re(clock.rho(), &(&matrix * &matrix));
        Ok(Self { matrix, drift, variance: (second - mean * mean).max(0.0) })
    }

    /// drift² / variance, the squared inverse time error of this reading.
    pub fn signal_to_noise(&self) -> f64 {
        snr(self.drift, self.variance)
    }
}

fn snr(drift: f64, variance: f64) -> f64 {
    if drift.abs() < 1e-14 {
        0.0
    } else if variance <= 0.0 {
        f64::INFINITY
    } else {
        drift * drift / variance
    }
}

/// Symmetric logarithmic derivative of `rho` along `rho_dot`.
///
/// Computed in the eigenbasis of ρ as `L_jk = 2 ρ̇_jk / (λ_j + λ_k)`; pairs
/// with `λ_j + λ_k` below `1e−10 · ‖ρ‖` are set to zero.
pub fn sld(rho: &CMatrix, rho_dot: &CMatrix) -> Result<CMatrix> {
    if rho.shape() != rho_dot.shape() {
        return Err(TempusError::DimensionMismatch { expected: rho.nrows(), found: rho_dot.nrows() });
    }
    for m in [rho, rho_dot] {
        let residual = linalg::hermitian_residual(m);
        if residual > 1e-9 {
            return Err(TempusError::NotHermitian { residual });
        }
    }
    let (values, vectors) = linalg::eigh(rho);
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = SLD_SUPPORT_CUTOFF * scale;
    let rotated = vectors.adjoint() * rho_dot * &vectors;
    let n = values.len();
    let l = CMatrix::from_fn(n, n, |j, k| {
        let s = values[j] + values[k];
        if s <= cutoff {
            linalg::ZERO
        } else {
            rotated[(j, k)] * (2.0 / s)
        }
    });
    Ok(linalg::hermitize(&(&vectors * l * vectors.adjoint())))
}

/// F(ρ, H) = tr(ρ̇ L)
pub fn quantum_fisher(clock: &QuantumClock) -> f64 {
    let rho_dot = clock.rho_dot();
    match sld(clock.rho(), &rho_dot) {
        Ok(l) => linalg::trace_product_re(&rho_dot, &l).max(0.0),
        // Valid clocks always yield Hermitian inputs.
        Err(_) => f64::NAN,
    }
}

/// The optimal timing observable of a clock.
pub fn optimal_observable(clock: &QuantumClock) -> Result<TimingObservable> {
    let l = sld(clock.rho(), &clock.rho_dot())?;
    TimingObservable::new(clock, l)
}

/// ∫ ṗ²/p over one period for the rotating density, with ṗ = −(ω/2π) ∂ₓp.
pub fn classical_fisher(clock: &ClassicalCircleClock) -> f64 {
    let n = clock.grid_size();
    let v = clock.velocity();
    v * v * spectral::translation_fisher(clock.density(), 1.0 / n as f64, CLASSICAL_DENSITY_FLOOR)
}

/// Discrete POVM with real outcome labels.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "crate::io::PovmJson", into = "crate::io::PovmJson")]
pub struct Povm {
    outcomes: Vec<f64>,
    effects: Vec<CMatrix>,
}

impl Povm {
    pub fn new(outcomes: Vec<f64>, effects: Vec<CMatrix>) -> Result<Self> {
        if outcomes.len() != effects.len() || effects.is_empty() {
            return Err(TempusError::InvalidArgument(format!(
                "{} outcomes for {} effects",
                outcomes.len(),
                effects.len()
            )));
        }
        let d = effects[0].nrows();
        let mut total = CMatrix::zeros(d, d);
        for (index, e) in effects.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(TempusError::DimensionMismatch { expected: d, found: e.nrows() });
            }
            let min_eigenvalue = linalg::min_eigenvalue(e);
            if min_eigenvalue < -1e-10 || linalg::hermitian_residual(e) > 1e-9 {
                return Err(TempusError::NonPositiveEffect { index, min_eigenvalue });
            }
            total += e;
        }
        let residual = linalg::max_abs(&(total - linalg::identity(d)));
        if residual > POVM_COMPLETENESS_TOLERANCE {
            return Err(TempusError::IncompletePovm { residual });
        }
        Ok(Self { outcomes, effects })
    }

    /// Projective measurement in the eigenbasis of a Hermitian matrix,
    /// labelled by its eigenvalues.
    pub fn spectral(observable: &CMatrix) -> Result<Self> {
        let (values, vectors) = linalg::eigh(observable);
        let mut outcomes: Vec<f64> = Vec::new();
        let mut effects: Vec<CMatrix> = Vec::new();
        for (j, &v) in values.iter().enumerate() {
            let p = linalg::outer(&vectors.column(j).into_owned());
            match outcomes.last() {
                Some(&last) if (v - last).abs() <= 1e-9 * (1.0 + v.abs()) => {
                    *effects.last_mut().unwrap() += p;
                }
                _ => {
                    outcomes.push(v);
                    effects.push(p);
                }
            }
        }
        Self::new(outcomes, effects)
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    /// A = Σ λ_j Q_j
    pub fn first_moment(&self) -> CMatrix {
        self.weighted_sum(|l| l)
    }

    /// Σ λ_j² Q_j
    pub fn second_moment(&self) -> CMatrix {
        self.weighted_sum(|l| l * l)
    }

    fn weighted_sum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = self.dim();
        self.outcomes
            .iter()
            .zip(&self.effects)
            .fold(CMatrix::zeros(d, d), |acc, (&l, e)| acc + e * c64(f(l), 0.0))
    }

    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| linalg::trace_product_re(rho, e)).collect()
    }

    pub fn is_projective(&self, tol: f64) -> bool {
        self.effects.iter().all(|e| linalg::max_abs(&(e * e - e)) <= tol)
    }
}

/// (tr(ρ̇A))² / Var_M for the POVM reading with A = Σ λ_j Q_j.
pub fn povm_snr(clock: &QuantumClock, povm: &Povm) -> Result<f64> {
    if povm.dim() != clock.dim() {
        return Err(TempusError::DimensionMismatch { expected: clock.dim(), found: povm.dim() });
    }
    let drift = linalg::trace_product_re(&clock.rho_dot(), &povm.first_moment());
    let probs = povm.probabilities(clock.rho());
    let mean: f64 = probs.iter().zip(povm.outcomes()).map(|(p, l)| p * l).sum();
    let second: f64 = probs.iter().zip(povm.outcomes()).map(|(p, l)| p * l * l).sum();
    Ok(snr(drift, (second - mean * mean).max(0.0)))
}

/// Σ λ_j² Q_j − A², the variance surplus of a POVM over the spectral
/// measurement of its first moment. Always positive semidefinite.
pub fn second_moment_correction(povm: &Povm) -> CMatrix {
    let a = povm.first_moment();
    linalg::hermitize(&(povm.second_moment() - &a * &a))
}

/// Spectral measurement of A = Σ λ_j Q_j. Its drift equals that of the
/// input POVM and its variance is smaller by tr(ρ · correction).
pub fn projectivize_povm(povm: &Povm) -> Result<Povm> {
    Povm::spectral(&povm.first_moment())
}

/// Root fidelity tr|√ρ₁ √ρ₂|.
pub fn fidelity(rho1: &CMatrix, rho2: &CMatrix) -> Result<f64> {
    if rho1.shape() != rho2.shape() {
        return Err(TempusError::DimensionMismatch { expected: rho1.nrows(), found: rho2.nrows() });
    }
    let product = linalg::psd_sqrt(rho1) * linalg::psd_sqrt(rho2);
    Ok(linalg::trace_norm(&product).clamp(0.0, 1.0))
}

/// Fidelity of a POVM's outcome distributions, Σ_b √p_b √q_b. Bounded
/// below by [`fidelity`] for every measurement.
pub fn classical_fidelity(povm_effects: &[CMatrix], rho1: &CMatrix, rho2: &CMatrix) -> f64 {
    povm_effects
        .iter()
        .map(|e| {
            let p = linalg::trace_product_re(rho1, e).max(0.0);
            let q = linalg::trace_product_re(rho2, e).max(0.0);
            (p * q).sqrt()
        })
        .sum()
}

/// (2 − 2 f(ρ, ρ_dt)) / (F dt²). Requires full-rank ρ and F > 0.
pub fn bures_fisher_constant(clock: &QuantumClock, dt: f64) -> Result<f64> {
    let f = quantum_fisher(clock);
    if f <= 1e-12 {
        return Err(TempusError::TrivialClock { fisher: f });
    }
    let min = linalg::min_eigenvalue(clock.rho());
    if min <= 1e-12 {
        return Err(TempusError::InvalidState(format!("state is not full rank (min eigenvalue {min:.3e})")));
    }
    let fid = fidelity(clock.rho(), clock.evolve(dt).rho())?;
    Ok((2.0 - 2.0 * fid) / (f * dt * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::HamiltonianSpec;
    use crate::linalg::{max_abs, CVector, I, ONE, ZERO};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn plus_clock() -> QuantumClock {
        QuantumClock::pure_real(&[1.0, 1.0], HamiltonianSpec::ladder(2)).unwrap()
    }

    #[test]
    fn sld_of_stationary_state_is_zero() {
        let rho = linalg::diag_real(&[0.3, 0.7]);
        let l = sld(&rho, &CMatrix::zeros(2, 2)).unwrap();
        assert_eq!(max_abs(&l), 0.0);
    }

    #[test]
    fn sld_on_pure_state_gives_unit_fisher() {
        let clock = plus_clock();
        let l = sld(clock.rho(), &clock.rho_dot()).unwrap();
        assert_abs_diff_eq!(linalg::trace_product_re(&clock.rho_dot(), &l), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sld_for_maximally_mixed_doubles_off_diagonals() {
        let rho = linalg::diag_real(&[0.5, 0.5]);
        let b = c64(0.2, -0.1);
        let rho_dot = CMatrix::from_row_slice(2, 2, &[ZERO, b, b.conj(), ZERO]);
        let l = sld(&rho, &rho_dot).unwrap();
        assert!((l[(0, 1)] - b * 2.0).norm() < 1e-14);
        let residual = (&rho * &l + &l * &rho) * c64(0.5, 0.0) - &rho_dot;
        assert!(max_abs(&residual) < 1e-12);
    }

    #[test]
    fn sld_rejects_non_hermitian_input() {
        let rho = linalg::diag_real(&[0.5, 0.5]);
        let bad = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(sld(&rho, &bad), Err(TempusError::NotHermitian { .. })));
    }

    #[test]
    fn fisher_of_equatorial_qubit_is_one() {
        assert_abs_diff_eq!(quantum_fisher(&plus_clock()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fisher_of_maximally_mixed_is_zero() {
        let clock = QuantumClock::new(linalg::identity(3) * c64(1.0 / 3.0, 0.0), HamiltonianSpec::ladder(3)).unwrap();
        assert_eq!(quantum_fisher(&clock), 0.0);
    }

    #[test]
    fn fisher_of_pure_state_is_four_variances() {
        let psi = CVector::from_vec(vec![c64(0.3, 0.1), c64(-0.2, 0.5), c64(0.6, 0.0), c64(0.1, -0.4)]);
        let clock = QuantumClock::pure(&psi, HamiltonianSpec::diagonal(vec![0.0, 1.5, -2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(quantum_fisher(&clock), 4.0 * clock.energy_variance(), epsilon = 1e-10);
    }

    #[test]
    fn classical_uniform_has_no_information() {
        assert_eq!(classical_fisher(&ClassicalCircleClock::uniform(128, 2.0 * PI)), 0.0);
    }

    #[test]
    fn sld_measurement_attains_quantum_fisher() {
        let rho = linalg::diag_real(&[0.7, 0.2, 0.1]);
        let u = HamiltonianSpec::ladder(3).propagator(0.0);
        let h = HamiltonianSpec::diagonal(vec![0.0, 1.0, 3.0]);
        let mut m = rho.clone();
        m[(0, 1)] = c64(0.1, 0.05);
        m[(1, 0)] = c64(0.1, -0.05);
        m[(0, 2)] = c64(0.05, 0.0);
        m[(2, 0)] = c64(0.05, 0.0);
        let clock = QuantumClock::new(&u * m * u.adjoint(), h).unwrap();
        let obs = optimal_observable(&clock).unwrap();
        let povm = Povm::spectral(&obs.matrix).unwrap();
        let f = quantum_fisher(&clock);
        assert_abs_diff_eq!(povm_snr(&clock, &povm).unwrap(), f, epsilon = 1e-8);
        assert_abs_diff_eq!(obs.signal_to_noise(), f, epsilon = 1e-8);
    }

    #[test]
    fn stationary_povm_has_no_signal() {
        let clock = plus_clock();
        let povm = Povm::new(vec![0.0, 1.0], vec![linalg::diag_real(&[1.0, 0.0]), linalg::diag_real(&[0.0, 1.0])]).unwrap();
        assert_eq!(povm_snr(&clock, &povm).unwrap(), 0.0);
    }

    #[test]
    fn incomplete_povm_is_rejected() {
        let r = Povm::new(vec![0.0, 1.0], vec![linalg::diag_real(&[1.0, 0.0]), linalg::diag_real(&[0.0, 0.5])]);
        assert!(matches!(r, Err(TempusError::IncompletePovm { .. })));
    }

    #[test]
    fn projective_input_is_a_fixed_point() {
        let povm = Povm::spectral(&CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])).unwrap();
        let again = projectivize_povm(&povm).unwrap();
        assert_eq!(again.outcomes().len(), povm.outcomes().len());
        for (a, b) in again.effects().iter().zip(povm.effects()) {
            assert!(max_abs(&(a - b)) < 1e-12);
        }
        let clock = QuantumClock::pure_real(&[1.0, 0.6], HamiltonianSpec::ladder(2)).unwrap();
        assert_abs_diff_eq!(povm_snr(&clock, &again).unwrap(), povm_snr(&clock, &povm).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn smeared_povm_gains_from_projectivization() {
        // Q0 = 0.8|0><0| + 0.2|1><1|, Q1 = 1 − Q0 in the |±> frame so the
        // reading is sensitive to the phase.
        let h = linalg::CMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, -ONE]) * c64(1.0 / 2f64.sqrt(), 0.0);
        let q0 = &h * linalg::diag_real(&[0.8, 0.2]) * &h;
        let q1 = linalg::identity(2) - &q0;
        let povm = Povm::new(vec![1.0, -1.0], vec![q0, q1]).unwrap();
        let clock = QuantumClock::pure(&CVector::from_vec(vec![ONE, I]), HamiltonianSpec::ladder(2)).unwrap();
        let before = povm_snr(&clock, &povm).unwrap();
        let after = povm_snr(&clock, &projectivize_povm(&povm).unwrap()).unwrap();
        // A = 0.6 X; drift = 0.6, Var_M = 1, Var_A = 0.36
        assert_abs_diff_eq!(before, 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(after, 1.0, epsilon = 1e-12);
        assert!(linalg::min_eigenvalue(&second_moment_correction(&povm)) >= -1e-10);
    }

    #[test]
    fn fidelity_special_cases() {
        let plus = plus_clock();
        assert_abs_diff_eq!(fidelity(plus.rho(), plus.rho()).unwrap(), 1.0, epsilon = 1e-12);
        let zero = linalg::diag_real(&[1.0, 0.0]);
        let one = linalg::diag_real(&[0.0, 1.0]);
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);
        let mixed = linalg::diag_real(&[0.5, 0.5]);
        assert_abs_diff_eq!(fidelity(plus.rho(), &mixed).unwrap(), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert!(fidelity(&zero, &linalg::identity(3)).is_err());
    }

    #[test]
    fn bures_constant_rejects_trivial_clock() {
        let clock = QuantumClock::new(linalg::diag_real(&[0.4, 0.6]), HamiltonianSpec::ladder(2)).unwrap();
        assert!(matches!(bures_fisher_constant(&clock, 1e-4), Err(TempusError::TrivialClock { .. })));
    }

    #[test]
    fn bures_constant_is_a_quarter() {
        let plus = plus_clock();
        let rho = plus.rho() * c64(0.9, 0.0) + linalg::identity(2) * c64(0.05, 0.0);
        let clock = QuantumClock::new(rho, HamiltonianSpec::ladder(2)).unwrap();
        let c3 = bures_fisher_constant(&clock, 1e-3).unwrap();
        let c4 = bures_fisher_constant(&clock, 1e-4).unwrap();
        let c5 = bures_fisher_constant(&clock, 5e-5).unwrap();
        assert!((c3 - c4).abs() / c4 < 1e-3);
        assert!((c5 - c4).abs() / c4 < 1e-2);
        assert_abs_diff_eq!(c4, 0.25, epsilon = 1e-3);
    }
}

//! Splitting a high-energy signal into two outputs that each keep nearly all
//! of its timing information.
//!
//! The input is a wavefunction ψ(x) on the energy half-line (H acts as
//! multiplication by x), sampled at x_k = kΔx. The isometry
//! (Aψ)(x, y) = ψ(x + y)/√(x + y) is evaluated on the half-cell grid
//! x_j = (j + ½)Δx, y_k = (k + ½)Δx, so x_j + y_k = (j + k + 1)Δx falls on
//! the input grid and the discrete map is an exact isometry up to the mass
//! of ψ at x = 0.
//!
//! Time readings are the Fourier variables conjugate to x and y: evolution
//! e^{−iHt} translates |ℱ⊗ℱ Aψ|² rigidly by t along both axes. The reported
//! per-output estimate is the Fisher information of that translation family
//! for one marginal of the reading distribution; the reading correlation is
//! derived from the Fisher information along the sum and difference
//! directions. Plain 1/Var estimates are reported as diagnostics: the edge
//! of Aψ at x = 0 gives the reading distribution k⁻² tails, which dominate
//! its variance.

use crate::error::{Result, TempusError};
use crate::spectral::{self, signed_mode};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const DEFAULT_SIGNAL_GRID: usize = 1024;
/// Grid spacing may not exceed ΔE divided by this.
pub const MIN_POINTS_PER_SIGMA: f64 = 16.0;
/// The grid must reach this many ΔE above E.
pub const GRID_REACH_SIGMAS: f64 = 6.0;
pub const NORM_TOLERANCE: f64 = 1e-8;
/// Largest mass allowed on the first few grid points before splitting.
pub const SINGULAR_MASS_LIMIT: f64 = 1e-8;
const SINGULAR_POINTS: usize = 4;
/// Reading-density bins below this fraction of the peak are skipped in
/// Fisher sums.
const DENSITY_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWavefunction {
    values: Vec<Complex64>,
    dx: f64,
}

impl GridWavefunction {
    pub fn new(values: Vec<Complex64>, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(TempusError::InvalidArgument(format!("grid spacing {dx} must be positive")));
        }
        let psi = Self { values, dx };
        let residual = (psi.norm() - 1.0).abs();
        if residual > NORM_TOLERANCE {
            return Err(TempusError::InvalidState(format!("wavefunction norm off by {residual:.3e}")));
        }
        Ok(psi)
    }

    /// Gaussian with energy mean `e` and energy spread `de` (|ψ|² has
    /// standard deviation `de`) on `n` points reaching e + 6·de, normalized
    /// on the grid.
    pub fn gaussian(e: f64, de: f64, n: usize) -> Result<Self> {
        if !(de > 0.0) || !(e > 0.0) || n < 2 {
            return Err(TempusError::InvalidArgument(format!("need E > 0, ΔE > 0, N ≥ 2 (got {e}, {de}, {n})")));
        }
        let dx = (e + GRID_REACH_SIGMAS * de) / n as f64;
        if dx > de / MIN_POINTS_PER_SIGMA {
            return Err(TempusError::InvalidArgument(format!(
                "{n} points cannot reach E + {GRID_REACH_SIGMAS}ΔE with {MIN_POINTS_PER_SIGMA} points per ΔE (E/ΔE = {})",
                e / de
            )));
        }
        let values: Vec<Complex64> = (0..n)
            .map(|k| {
                let x = k as f64 * dx;
                Complex64::new((-(x - e).powi(2) / (4.0 * de * de)).exp(), 0.0)
            })
            .collect();
        let norm = (dx * values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        Self::new(values.into_iter().map(|z| z / norm).collect(), dx)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Δx Σ|ψ_k|²
    pub fn norm(&self) -> f64 {
        self.dx * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Energy distribution Δx|ψ_k|² on the grid.
    pub fn energy_distribution(&self) -> Vec<f64> {
        self.values.iter().map(|z| self.dx * z.norm_sqr()).collect()
    }

    pub fn energy_mean(&self) -> f64 {
        self.energy_distribution().iter().enumerate().map(|(k, p)| k as f64 * self.dx * p).sum()
    }

    pub fn energy_variance(&self) -> f64 {
        let mean = self.energy_mean();
        self.energy_distribution().iter().enumerate().map(|(k, p)| (k as f64 * self.dx - mean).powi(2) * p).sum()
    }
}

/// N × N samples of a two-system wavefunction on the half-cell grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointGridWavefunction {
    /// Row-major: row j is x_j = (j + ½)Δx, column k is y_k = (k + ½)Δx.
    values: Vec<Complex64>,
    n: usize,
    dx: f64,
}

impl JointGridWavefunction {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn at(&self, j: usize, k: usize) -> Complex64 {
        self.values[j * self.n + k]
    }

    /// Δx² ΣΣ|·|²
    pub fn norm(&self) -> f64 {
        self.dx * self.dx * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Distribution of the total energy x + y on the input grid:
    /// entry m is the mass at (m)Δx.
    pub fn total_energy_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.n];
        for j in 0..self.n {
            for k in 0..self.n - j - 1 {
                p[j + k + 1] += self.dx * self.dx * self.at(j, k).norm_sqr();
            }
        }
        p
    }

    /// tr(ρ₁²) and tr(ρ₂²) for the reduced states of the two outputs.
    pub fn marginal_purities(&self) -> (f64, f64) {
        let n = self.n;
        let re = DMatrix::from_fn(n, n, |j, k| self.at(j, k).re);
        let im = DMatrix::from_fn(n, n, |j, k| self.at(j, k).im);
        let purity = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> f64 {
            // ρ = Δx² (R + iI)(R + iI)† = Δx² [(RRᵀ + IIᵀ) + i(IRᵀ − RIᵀ)]
            let real = a * a.transpose() + b * b.transpose();
            let imag = b * a.transpose() - a * b.transpose();
            self.dx.powi(4) * (real.norm_squared() + imag.norm_squared())
        };
        let first = purity(&re, &im);
        let (re_t, im_t) = (re.transpose(), im.transpose());
        (first, purity(&re_t, &im_t))
    }
}

/// (Aψ)(x, y) = ψ(x + y)/√(x + y) on the half-cell output grid.
pub fn split(psi: &GridWavefunction) -> Result<JointGridWavefunction> {
    let residual = (psi.norm() - 1.0).abs();
    if residual > NORM_TOLERANCE {
        return Err(TempusError::InvalidState(format!("wavefunction norm off by {residual:.3e}")));
    }
    let n = psi.len();
    let dx = psi.dx();
    let mass: f64 = psi.values().iter().take(SINGULAR_POINTS).map(|z| dx * z.norm_sqr()).sum();
    if mass > SINGULAR_MASS_LIMIT {
        return Err(TempusError::SingularSplit { mass });
    }
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for k in 0..n - j - 1 {
            let m = j + k + 1;
            values[j * n + k] = psi.values()[m] / (m as f64 * dx).sqrt();
        }
    }
    Ok(JointGridWavefunction { values, n, dx })
}

/// 4 × (energy variance on the grid), the Fisher information of a pure
/// signal.
pub fn input_timing_info(psi: &GridWavefunction) -> f64 {
    4.0 * psi.energy_variance()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputTimingInfo {
    /// Fisher information of output 1's time reading.
    pub f1_est: f64,
    pub f2_est: f64,
    /// (F₋ − F₊)/(F₋ + F₊); equals the correlation coefficient of the two
    /// readings for a Gaussian reading distribution.
    pub correlation: f64,
    /// Fisher information for translating both readings together (the
    /// joint state's own timing information).
    pub fisher_sum: f64,
    /// Fisher information for translating the readings in opposite
    /// directions.
    pub fisher_difference: f64,
    /// 1/Var of each reading.
    pub variance_snr1: f64,
    pub variance_snr2: f64,
    /// Plain correlation coefficient of the two readings.
    pub variance_correlation: f64,
    /// Fraction of ‖T̂ℱφ‖² that falls outside the half-line after
    /// transforming back, averaged over output 2 (the projector ℱℱ† ≠ 1).
    pub positive_frequency_deficit: f64,
}

/// Time-reading statistics of the two outputs, from the zero-padded
/// 2N × 2N transform of the joint wavefunction.
pub fn output_timing_info(joint: &JointGridWavefunction) -> OutputTimingInfo {
    let n = joint.n;
    let m = 2 * n;
    let dx = joint.dx;
    let dk = TAU / (m as f64 * dx);

    let mut spectrum = vec![Complex64::new(0.0, 0.0); m * m];
    for j in 0..n {
        spectrum[j * m..j * m + n].copy_from_slice(&joint.values[j * n..(j + 1) * n]);
    }
    spectral::fft2(&mut spectrum, m, m, false);
    let mut density: Vec<f64> = spectrum.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = density.iter().sum::<f64>() * dk * dk;
    density.iter_mut().for_each(|p| *p /= total);

    let k_of = |i: usize| signed_mode(i, m) as f64 * dk;
    let marginal1: Vec<f64> = (0..m).map(|a| density[a * m..(a + 1) * m].iter().sum::<f64>() * dk).collect();
    let marginal2: Vec<f64> = (0..m).map(|b| (0..m).map(|a| density[a * m + b]).sum::<f64>() * dk).collect();
    let f1_est = spectral::translation_fisher(&marginal1, dk, DENSITY_FLOOR * max(&marginal1));
    let f2_est = spectral::translation_fisher(&marginal2, dk, DENSITY_FLOOR * max(&marginal2));

    // Directional derivatives of the periodic reading density via its
    // transform; the conjugate grid has spacing 2π/(m dk) = dx.
    let mut transformed: Vec<Complex64> = density.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    spectral::fft2(&mut transformed, m, m, false);
    let floor = DENSITY_FLOOR * max(&density);
    let directional = |u: f64, v: f64| -> f64 {
        let mut d = transformed.clone();
        for a in 0..m {
            let qa = signed_mode(a, m) as f64;
            for b in 0..m {
                let qb = signed_mode(b, m) as f64;
                let nyquist = (m % 2 == 0) && (a == m / 2 || b == m / 2);
                let factor = if nyquist { 0.0 } else { TAU / (m as f64 * dk) * (u * qa + v * qb) };
                d[a * m + b] *= Complex64::new(0.0, factor);
            }
        }
        spectral::fft2(&mut d, m, m, true);
        density
            .iter()
            .zip(&d)
            .filter(|(p, _)| **p >= floor && **p > 0.0)
            .map(|(p, dp)| dp.re * dp.re / p)
            .sum::<f64>()
            * dk
            * dk
    };
    let fisher_sum = directional(1.0, 1.0);
    let fisher_difference = directional(1.0, -1.0);

    let (mut mean1, mut mean2) = (0.0, 0.0);
    for a in 0..m {
        for b in 0..m {
            let p = density[a * m + b] * dk * dk;
            mean1 += p * k_of(a);
            mean2 += p * k_of(b);
        }
    }
    let (mut var1, mut var2, mut cov) = (0.0, 0.0, 0.0);
    for a in 0..m {
        for b in 0..m {
            let p = density[a * m + b] * dk * dk;
            let (da, db) = (k_of(a) - mean1, k_of(b) - mean2);
            var1 += p * da * da;
            var2 += p * db * db;
            cov += p * da * db;
        }
    }

    OutputTimingInfo {
        f1_est,
        f2_est,
        correlation: (fisher_difference - fisher_sum) / (fisher_difference + fisher_sum),
        fisher_sum,
        fisher_difference,
        variance_snr1: 1.0 / var1,
        variance_snr2: 1.0 / var2,
        variance_correlation: cov / (var1 * var2).sqrt(),
        positive_frequency_deficit: positive_frequency_deficit(joint),
    }
}

fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// For each column y, transform φ(·, y) (zero-padded to 2N), multiply by
/// the reading variable, transform back and measure the mass landing in
/// the padding (negative x). Weighted by each column's ‖T̂ℱφ‖².
fn positive_frequency_deficit(joint: &JointGridWavefunction) -> f64 {
    let n = joint.n;
    let m = 2 * n;
    let dk = TAU / (m as f64 * joint.dx);
    let mut outside = 0.0;
    let mut total = 0.0;
    let mut column = vec![Complex64::new(0.0, 0.0); m];
    let mut planner = rustfft::FftPlanner::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);
    for k in 0..n {
        column.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for j in 0..n {
            column[j] = joint.at(j, k);
        }
        forward.process(&mut column);
        for (i, z) in column.iter_mut().enumerate() {
            *z *= signed_mode(i, m) as f64 * dk;
        }
        inverse.process(&mut column);
        let mass: Vec<f64> = column.iter().map(|z| z.norm_sqr()).collect();
        outside += mass[n..].iter().sum::<f64>();
        total += mass.iter().sum::<f64>();
    }
    if total > 0.0 { outside / total } else { 0.0 }
}

/// One line of the energy sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "dE")]
    pub de: f64,
    #[serde(rename = "input_F")]
    pub input_f: f64,
    pub f1_est: f64,
    pub f2_est: f64,
    pub correlation: f64,
    pub purity1: f64,
    pub norm_residual: f64,
}

pub const SWEEP_CSV_HEADER: &str = "E,dE,input_F,f1_est,f2_est,correlation,purity1,norm_residual";

impl SweepRow {
    /// Shortest round-trip float text, with exponents for tiny values.
    pub fn to_csv(&self) -> String {
        [self.e, self.de, self.input_f, self.f1_est, self.f2_est, self.correlation, self.purity1, self.norm_residual]
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Gaussian signal of mean `e` and spread `de` on `n` points, split and
/// analysed.
pub fn sweep_row(e: f64, de: f64, n: usize) -> Result<SweepRow> {
    let psi = GridWavefunction::gaussian(e, de, n)?;
    let joint = split(&psi)?;
    let info = output_timing_info(&joint);
    let (purity1, _) = joint.marginal_purities();
    Ok(SweepRow {
        e,
        de,
        input_f: input_timing_info(&psi),
        f1_est: info.f1_est,
        f2_est: info.f2_est,
        correlation: info.correlation,
        purity1,
        norm_residual: (joint.norm() - 1.0).abs(),
    })
}

//! FFT utilities on uniform periodic grids.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Signed mode index of DFT bin `k` on an `n`-point grid.
#[inline]
pub fn signed_mode(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

pub fn fft(values: &[Complex64]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse DFT including the 1/n normalization.
pub fn ifft(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

pub fn fft_real(values: &[f64]) -> Vec<Complex64> {
    fft(&values.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>())
}

/// Translate a periodic real sampled function by `shift` periods:
/// output(x) = input(x − shift). Exact for band-limited input.
pub fn circular_shift(values: &[f64], shift: f64) -> Vec<f64> {
    let n = values.len();
    let mut spectrum = fft_real(values);
    for (k, z) in spectrum.iter_mut().enumerate() {
        let m = signed_mode(k, n);
        if n % 2 == 0 && k == n / 2 {
            // Nyquist bin: keep the real-valued symmetric part only.
            *z *= (2.0 * PI * m as f64 * shift).cos();
        } else {
            *z *= Complex64::from_polar(1.0, -2.0 * PI * m as f64 * shift);
        }
    }
    ifft(&spectrum).iter().map(|z| z.re).collect()
}

/// d/dx of a periodic real function sampled on `n` points over a period of
/// length `period`. The Nyquist mode is dropped.
pub fn spectral_derivative(values: &[f64], period: f64) -> Vec<f64> {
    let n = values.len();
    let mut spectrum = fft_real(values);
    for (k, z) in spectrum.iter_mut().enumerate() {
        if n % 2 == 0 && k == n / 2 {
            *z = Complex64::new(0.0, 0.0);
        } else {
            *z *= Complex64::new(0.0, 2.0 * PI * signed_mode(k, n) as f64 / period);
        }
    }
    ifft(&spectrum).iter().map(|z| z.re).collect()
}

/// Fisher information ∫ (∂ₓp)² / p dx of the translation family p(x − t),
/// for a density sampled with grid spacing `spacing` on a periodic grid.
/// Bins where `p < floor` contribute nothing.
pub fn translation_fisher(density: &[f64], spacing: f64, floor: f64) -> f64 {
    let period = spacing * density.len() as f64;
    let derivative = spectral_derivative(density, period);
    density
        .iter()
        .zip(&derivative)
        .filter(|(p, _)| **p >= floor)
        .map(|(p, dp)| dp * dp / p)
        .sum::<f64>()
        * spacing
}

/// In-place 2-D DFT of a row-major `rows × cols` array. The inverse
/// includes the 1/(rows·cols) normalization.
pub fn fft2(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::new();
    let (row_plan, col_plan) = if inverse {
        (planner.plan_fft_inverse(cols), planner.plan_fft_inverse(rows))
    } else {
        (planner.plan_fft_forward(cols), planner.plan_fft_forward(rows))
    };
    row_plan.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_plan.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
    if inverse {
        let scale = 1.0 / (rows * cols) as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

//! Dense complex linear algebra helpers shared by every module.
//!
//! All matrices are `nalgebra::DMatrix<Complex64>`. Hermitian routines
//! symmetrize their input before decomposing, so callers may pass matrices
//! carrying round-off asymmetry.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c64(values[i], 0.0) } else { ZERO })
}

/// Projector |v⟩⟨v| (no normalization).
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

pub fn unitary_residual(u: &CMatrix) -> f64 {
    max_abs(&(u.adjoint() * u - identity(u.nrows())))
}

/// Eigendecomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    if n == 1 {
        return (vec![m[(0, 0)].re], identity(1));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

/// V diag(f(λ)) V† for the Hermitian part of `m`.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = eigh(m);
    reconstruct(&values.iter().map(|&v| f(v)).collect::<Vec<_>>(), &vectors)
}

pub fn reconstruct(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= v;
        }
    }
    scaled * vectors.adjoint()
}

/// Nearest PSD matrix in Frobenius norm.
pub fn project_psd(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |v| v.max(0.0))
}

pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |v| v.max(0.0).sqrt())
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// Trace norm of a Hermitian matrix via its spectrum.
pub fn hermitian_trace_norm(m: &CMatrix) -> f64 {
    eigvalsh(m).iter().map(|v| v.abs()).sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Trace over the second factor of a `da·db` bipartite operator.
pub fn partial_trace_second(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum())
}

/// Trace over the first factor of a `da·db` bipartite operator.
pub fn partial_trace_first(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(db, db, |i, j| (0..da).map(|k| m[(k * db + i, k * db + j)]).sum())
}

/// Real part of tr(a b) without forming the product.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn is_real_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigh_orders_ascending_and_reconstructs() {
        let m = CMatrix::from_row_slice(2, 2, &[c64(2.0, 0.0), c64(0.0, 1.0), c64(0.0, -1.0), c64(2.0, 0.0)]);
        let (vals, vecs) = eigh(&m);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        assert!(max_abs(&(reconstruct(&vals, &vecs) - m)) < 1e-12);
    }

    #[test]
    fn partial_traces_of_product() {
        let a = diag_real(&[0.25, 0.75]);
        let b = diag_real(&[0.1, 0.2, 0.7]);
        let ab = kron(&a, &b);
        assert!(max_abs(&(partial_trace_second(&ab, 2, 3) - &a)) < 1e-14);
        assert!(max_abs(&(partial_trace_first(&ab, 2, 3) - &b)) < 1e-14);
    }

    #[test]
    fn trace_norm_of_hermitian_matches_spectrum() {
        let m = diag_real(&[-0.5, 0.25, 1.0]);
        assert_abs_diff_eq!(trace_norm(&m), 1.75, epsilon = 1e-12);
        assert_abs_diff_eq!(hermitian_trace_norm(&m), 1.75, epsilon = 1e-12);
    }

    #[test]
    fn psd_projection_clips_negative_part() {
        let m = diag_real(&[-1.0, 2.0]);
        assert!(max_abs(&(project_psd(&m) - diag_real(&[0.0, 2.0]))) < 1e-14);
    }
}

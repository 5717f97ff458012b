//! Dykstra alternating projections between the PSD cone (block by block)
//! and a polyhedron {Ax = b, Re⟨g_i, x⟩ ≥ f_i} in a space of Hermitian
//! blocks.
//!
//! Blocks are flattened row-major into one complex vector, so the Euclidean
//! norm of the vector is the Frobenius norm of the blocks. Constraints are
//! written with complex rows. Because the constraint sets used here are
//! invariant under taking the Hermitian conjugate of every block, projecting
//! a Hermitian point onto them gives a Hermitian point; iterates are
//! re-hermitized after each step to stop round-off from accumulating.
//!
//! Boundary-feasible problems (no strictly feasible point) make alternating
//! projections converge sublinearly. [`refine_on_face`] finishes such runs
//! for pure equality problems: each block is factored as V V† with ranks
//! read off the current iterate (the k largest eigenpairs overall, k = 1,
//! 2, …) and the equality constraints are solved by Levenberg–Marquardt.
//! PSD holds exactly, and convergence is fast once the ranks match the face
//! containing the solution.

use crate::linalg::{self, c64, CMatrix, CVector};
use log::debug;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Layout of a list of square blocks inside one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpace {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockSpace {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut dim = 0;
        for &s in &sizes {
            offsets.push(dim);
            dim += s * s;
        }
        Self { sizes, offsets, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Position of entry (i, j) of block `b`.
    pub fn index(&self, b: usize, i: usize, j: usize) -> usize {
        self.offsets[b] + i * self.sizes[b] + j
    }

    pub fn flatten(&self, blocks: &[CMatrix]) -> CVector {
        let mut v = CVector::zeros(self.dim);
        for (b, block) in blocks.iter().enumerate() {
            for i in 0..self.sizes[b] {
                for j in 0..self.sizes[b] {
                    v[self.index(b, i, j)] = block[(i, j)];
                }
            }
        }
        v
    }

    pub fn unflatten(&self, v: &CVector) -> Vec<CMatrix> {
        self.sizes
            .iter()
            .enumerate()
            .map(|(b, &s)| CMatrix::from_fn(s, s, |i, j| v[self.index(b, i, j)]))
            .collect()
    }

    fn hermitize(&self, v: &CVector) -> CVector {
        self.flatten(&self.unflatten(v).iter().map(linalg::hermitize).collect::<Vec<_>>())
    }

    fn project_psd(&self, v: &CVector) -> CVector {
        self.flatten(&self.unflatten(v).iter().map(linalg::project_psd).collect::<Vec<_>>())
    }
}

/// Re(Σ_k row_k x_k) ≥ level
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub row: CVector,
    pub level: f64,
}

/// Projector onto {A_S x = b_S} for one choice S of tight halfspaces.
#[derive(Clone, Debug)]
struct AffineProjector {
    rows: CMatrix,
    rhs: CVector,
    pinv: CMatrix,
    consistent: bool,
}

impl AffineProjector {
    fn new(rows: CMatrix, rhs: CVector) -> Self {
        let pinv = if rows.nrows() == 0 {
            CMatrix::zeros(rows.ncols(), 0)
        } else {
            rows.clone().pseudo_inverse(1e-12).unwrap_or_else(|_| CMatrix::zeros(rows.ncols(), rows.nrows()))
        };
        // The system is solvable iff its least-squares solution solves it.
        let x = &pinv * &rhs;
        let residual = (&rows * x - &rhs).camax();
        let scale = rhs.camax().max(1.0);
        Self { rows, rhs, pinv, consistent: residual <= 1e-9 * scale }
    }

    fn project(&self, x: &CVector) -> CVector {
        if self.rows.nrows() == 0 {
            return x.clone();
        }
        x - &self.pinv * (&self.rows * x - &self.rhs)
    }
}

/// PSD blocks intersected with a polyhedron.
#[derive(Clone, Debug)]
pub struct FeasibilityProblem {
    space: BlockSpace,
    eq_rows: CMatrix,
    eq_rhs: CVector,
    halfspaces: Vec<Halfspace>,
    /// One projector per subset of tight halfspaces, by increasing size.
    projectors: Vec<(Vec<usize>, AffineProjector)>,
}

impl FeasibilityProblem {
    pub fn new(space: BlockSpace, eq_rows: CMatrix, eq_rhs: CVector, halfspaces: Vec<Halfspace>) -> Self {
        assert_eq!(eq_rows.ncols(), space.dim());
        assert_eq!(eq_rows.nrows(), eq_rhs.len());
        assert!(halfspaces.len() <= 8, "active-set enumeration supports at most 8 halfspaces");
        let h = halfspaces.len();
        let mut subsets: Vec<Vec<usize>> = (0u32..(1 << h))
            .map(|mask| (0..h).filter(|&i| mask & (1 << i) != 0).collect())
            .collect();
        subsets.sort_by_key(Vec::len);
        let projectors = subsets
            .into_iter()
            .map(|subset| {
                let k = eq_rows.nrows() + subset.len();
                let mut rows = CMatrix::zeros(k, space.dim());
                let mut rhs = CVector::zeros(k);
                rows.rows_mut(0, eq_rows.nrows()).copy_from(&eq_rows);
                rhs.rows_mut(0, eq_rows.nrows()).copy_from(&eq_rhs);
                for (r, &i) in subset.iter().enumerate() {
                    rows.row_mut(eq_rows.nrows() + r).copy_from(&halfspaces[i].row.transpose());
                    rhs[eq_rows.nrows() + r] = c64(halfspaces[i].level, 0.0);
                }
                let projector = AffineProjector::new(rows, rhs);
                (subset, projector)
            })
            .collect();
        Self { space, eq_rows, eq_rhs, halfspaces, projectors }
    }

    pub fn space(&self) -> &BlockSpace {
        &self.space
    }

    /// False when the equality constraints alone have no solution.
    pub fn affine_consistent(&self) -> bool {
        self.projectors[0].1.consistent
    }

    fn halfspace_value(&self, i: usize, x: &CVector) -> f64 {
        self.halfspaces[i].row.iter().zip(x.iter()).map(|(g, v)| g * v).sum::<Complex64>().re
    }

    /// Euclidean projection onto the polyhedron, or None if it is empty.
    pub fn project_polyhedron(&self, x: &CVector) -> Option<CVector> {
        let mut best: Option<(f64, CVector)> = None;
        for (_, projector) in &self.projectors {
            if !projector.consistent {
                continue;
            }
            let y = projector.project(x);
            let feasible = (0..self.halfspaces.len()).all(|i| {
                let scale = self.halfspaces[i].level.abs().max(1.0);
                self.halfspace_value(i, &y) >= self.halfspaces[i].level - 1e-12 * scale
            });
            if !feasible {
                continue;
            }
            let distance = (&y - x).norm();
            if best.as_ref().map_or(true, |(d, _)| distance < *d) {
                best = Some((distance, y));
            }
            if self.halfspaces.is_empty() {
                break;
            }
        }
        best.map(|(_, y)| self.space.hermitize(&y))
    }

    /// max |Ax − b| together with the worst halfspace violation.
    pub fn constraint_residual(&self, x: &CVector) -> f64 {
        let eq = if self.eq_rows.nrows() == 0 { 0.0 } else { (&self.eq_rows * x - &self.eq_rhs).camax() };
        (0..self.halfspaces.len())
            .map(|i| (self.halfspaces[i].level - self.halfspace_value(i, x)).max(0.0))
            .fold(eq, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DykstraSettings {
    pub max_iter: usize,
    /// Iterations without improvement before giving up.
    pub stall_window: usize,
    /// Improvement of the best residual that counts as progress.
    pub stall_decrease: f64,
    /// Attempt to certify a witness every this many iterations.
    pub check_every: usize,
    /// Attempt face refinement every this many iterations (equality-only
    /// problems).
    pub refine_every: usize,
}

impl Default for DykstraSettings {
    fn default() -> Self {
        Self { max_iter: 50_000, stall_window: 500, stall_decrease: 1e-12, check_every: 20, refine_every: 2_000 }
    }
}

#[derive(Clone, Debug)]
pub struct DykstraOutcome<T> {
    /// PSD blocks accepted by the caller together with the caller's verdict.
    pub witness: Option<(Vec<CMatrix>, T)>,
    pub iterations: usize,
    /// Final distance between the polyhedron iterate and the PSD iterate.
    pub residual: f64,
    /// Smallest such distance seen.
    pub best_residual: f64,
    pub stalled: bool,
    pub affine_inconsistent: bool,
    /// Residual every `check_every` iterations.
    pub history: Vec<f64>,
}

/// Runs Dykstra's algorithm from `start`. `certify` is handed PSD blocks
/// and returns Some when they are good enough for the caller; the run stops
/// at the first accepted candidate, when progress stalls, or at the
/// iteration cap.
pub fn solve<T>(
    problem: &FeasibilityProblem,
    start: &[CMatrix],
    settings: &DykstraSettings,
    mut certify: impl FnMut(&[CMatrix]) -> Option<T>,
) -> DykstraOutcome<T> {
    let space = &problem.space;
    let mut outcome = DykstraOutcome {
        witness: None,
        iterations: 0,
        residual: f64::INFINITY,
        best_residual: f64::INFINITY,
        stalled: false,
        affine_inconsistent: false,
        history: Vec::new(),
    };
    if !problem.affine_consistent() {
        outcome.affine_inconsistent = true;
        return outcome;
    }
    let mut x = space.flatten(start);
    let mut p = CVector::zeros(space.dim());
    let mut q = CVector::zeros(space.dim());
    let mut since_progress = 0;
    for k in 1..=settings.max_iter {
        let Some(y) = problem.project_polyhedron(&(&x + &p)) else {
            outcome.affine_inconsistent = true;
            return outcome;
        };
        p = &x + &p - &y;
        let x_new = space.project_psd(&(&y + &q));
        q = &y + &q - &x_new;
        let residual = (&x_new - &y).norm();
        x = x_new;
        outcome.iterations = k;
        outcome.residual = residual;

        if residual < outcome.best_residual - settings.stall_decrease {
            outcome.best_residual = residual;
            since_progress = 0;
        } else {
            since_progress += 1;
        }

        let last = k == settings.max_iter || since_progress >= settings.stall_window;
        if k % settings.check_every == 0 || last {
            outcome.history.push(residual);
            let blocks = space.unflatten(&x);
            if let Some(verdict) = certify(&blocks) {
                outcome.witness = Some((blocks, verdict));
                return outcome;
            }
        }
        if k % settings.refine_every == 0 || last {
            if let Some(found) = refine_and_certify(problem, &x, &mut certify) {
                debug!("face refinement certified a witness after {k} iterations");
                outcome.witness = Some(found);
                return outcome;
            }
        }
        if since_progress >= settings.stall_window {
            outcome.stalled = true;
            break;
        }
    }
    outcome
}

fn refine_and_certify<T>(
    problem: &FeasibilityProblem,
    x: &CVector,
    certify: &mut impl FnMut(&[CMatrix]) -> Option<T>,
) -> Option<(Vec<CMatrix>, T)> {
    if !problem.halfspaces.is_empty() || problem.eq_rows.nrows() == 0 {
        return None;
    }
    let decompositions: Vec<(Vec<f64>, CMatrix)> = problem.space.unflatten(x).iter().map(linalg::eigh).collect();
    let mut ranked: Vec<(f64, usize, usize)> = decompositions
        .iter()
        .enumerate()
        .flat_map(|(b, (values, _))| values.iter().enumerate().map(move |(k, &v)| (v, b, k)))
        .collect();
    ranked.sort_by(|p, q| q.0.total_cmp(&p.0));
    let top = ranked.first().map_or(0.0, |r| r.0);
    if top <= 0.0 {
        return None;
    }
    let positive = ranked.iter().take_while(|r| r.0 > 1e-12 * top).count();
    for keep in 1..=positive {
        let factors: Vec<CMatrix> = decompositions
            .iter()
            .enumerate()
            .map(|(b, (values, vectors))| {
                let kept: Vec<usize> = ranked[..keep].iter().filter(|r| r.1 == b).map(|r| r.2).collect();
                CMatrix::from_fn(vectors.nrows(), kept.len(), |i, j| vectors[(i, kept[j])] * values[kept[j]].sqrt())
            })
            .collect();
        if let Some(blocks) = refine_on_face(problem, factors) {
            if let Some(verdict) = certify(&blocks) {
                return Some((blocks, verdict));
            }
        }
    }
    None
}

/// Levenberg–Marquardt solution of the equality constraints over blocks
/// V_b V_b†, starting from the given factors (their column counts fix the
/// ranks). Returns the PSD blocks once the equality residual falls below
/// 1e−13, or None if it does not within 100 steps.
pub fn refine_on_face(problem: &FeasibilityProblem, mut factors: Vec<CMatrix>) -> Option<Vec<CMatrix>> {
    let space = &problem.space;
    let eq_rows = &problem.eq_rows;
    let k = eq_rows.nrows();
    let params: usize = factors.iter().map(|f| 2 * f.len()).sum();
    if params == 0 || k == 0 {
        return None;
    }
    let assemble = |factors: &[CMatrix]| -> CVector {
        space.flatten(&factors.iter().map(|v| v * v.adjoint()).collect::<Vec<_>>())
    };
    let residual_of = |factors: &[CMatrix]| eq_rows * assemble(factors) - &problem.eq_rhs;
    let mut residual = residual_of(&factors);
    let mut damping = 1e-6;
    for _ in 0..100 {
        if residual.camax() < 1e-13 {
            return Some(factors.iter().map(|v| v * v.adjoint()).collect());
        }
        let mut jacobian = DMatrix::<f64>::zeros(2 * k, params);
        let mut col = 0;
        for (b, v) in factors.iter().enumerate() {
            let s = v.nrows();
            for i in 0..s {
                for j in 0..v.ncols() {
                    for unit in [c64(1.0, 0.0), c64(0.0, 1.0)] {
                        // d(VV†) along E = unit·e_i e_jᵀ is E V† + V E†.
                        let mut delta = CMatrix::zeros(s, s);
                        for c in 0..s {
                            delta[(i, c)] += unit * v[(c, j)].conj();
                            delta[(c, i)] += v[(c, j)] * unit.conj();
                        }
                        let mut column = CVector::zeros(k);
                        for a in 0..s {
                            for c in 0..s {
                                let z = delta[(a, c)];
                                if z.re != 0.0 || z.im != 0.0 {
                                    column += eq_rows.column(space.index(b, a, c)) * z;
                                }
                            }
                        }
                        for r in 0..k {
                            jacobian[(r, col)] = column[r].re;
                            jacobian[(k + r, col)] = column[r].im;
                        }
                        col += 1;
                    }
                }
            }
        }
        let rhs = DVector::from_iterator(2 * k, residual.iter().map(|z| -z.re).chain(residual.iter().map(|z| -z.im)));
        let jt = jacobian.transpose();
        let normal = &jt * &jacobian;
        let gradient = &jt * &rhs;
        let current = residual.norm();
        let mut accepted = None;
        for _ in 0..60 {
            let mut damped = normal.clone();
            for d in 0..params {
                damped[(d, d)] += damping;
            }
            let Some(chol) = damped.cholesky() else {
                damping *= 4.0;
                continue;
            };
            let step = chol.solve(&gradient);
            let mut trial = factors.clone();
            let mut col = 0;
            for v in trial.iter_mut() {
                for i in 0..v.nrows() {
                    for j in 0..v.ncols() {
                        v[(i, j)] += c64(step[col], step[col + 1]);
                        col += 2;
                    }
                }
            }
            let r = residual_of(&trial);
            if r.norm() < current {
                damping = (damping / 3.0).max(1e-15);
                accepted = Some((trial, r));
                break;
            }
            damping *= 4.0;
        }
        let (next, r) = accepted?;
        factors = next;
        residual = r;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 2×2 PSD matrices X with X₀₀ = 1, X₁₁ = 1 and Re X₀₁ ≥ level.
    fn correlation_problem(level: f64) -> FeasibilityProblem {
        let space = BlockSpace::new(vec![2]);
        let mut rows = CMatrix::zeros(2, 4);
        rows[(0, space.index(0, 0, 0))] = c64(1.0, 0.0);
        rows[(1, space.index(0, 1, 1))] = c64(1.0, 0.0);
        let rhs = CVector::from_vec(vec![c64(1.0, 0.0), c64(1.0, 0.0)]);
        let mut g = CVector::zeros(4);
        g[space.index(0, 0, 1)] = c64(0.5, 0.0);
        g[space.index(0, 1, 0)] = c64(0.5, 0.0);
        FeasibilityProblem::new(space, rows, rhs, vec![Halfspace { row: g, level }])
    }

    #[test]
    fn interior_problem_converges() {
        let problem = correlation_problem(0.5);
        let start = vec![CMatrix::zeros(2, 2)];
        let out = solve(&problem, &start, &DykstraSettings::default(), |blocks| {
            let x = problem.space().flatten(blocks);
            (problem.constraint_residual(&x) < 1e-9).then_some(())
        });
        assert!(out.witness.is_some());
    }

    #[test]
    fn infeasible_problem_stalls_with_positive_gap() {
        let problem = correlation_problem(1.5);
        let start = vec![CMatrix::zeros(2, 2)];
        let out = solve(&problem, &start, &DykstraSettings::default(), |blocks| {
            let x = problem.space().flatten(blocks);
            (problem.constraint_residual(&x) < 1e-9).then_some(())
        });
        assert!(out.witness.is_none());
        assert!(out.best_residual > 0.1);
    }

    #[test]
    fn boundary_problem_is_finished_by_face_refinement() {
        // Only X = [[1,1],[1,1]] satisfies X₀₀ = X₁₁ = 1, X₀₁ + X₁₀ = 2.
        let space = BlockSpace::new(vec![2]);
        let mut rows = CMatrix::zeros(3, 4);
        rows[(0, space.index(0, 0, 0))] = c64(1.0, 0.0);
        rows[(1, space.index(0, 1, 1))] = c64(1.0, 0.0);
        rows[(2, space.index(0, 0, 1))] = c64(1.0, 0.0);
        rows[(2, space.index(0, 1, 0))] = c64(1.0, 0.0);
        let rhs = CVector::from_vec(vec![c64(1.0, 0.0), c64(1.0, 0.0), c64(2.0, 0.0)]);
        let problem = FeasibilityProblem::new(space, rows, rhs, vec![]);
        let start = vec![CMatrix::zeros(2, 2)];
        let out = solve(&problem, &start, &DykstraSettings::default(), |blocks| {
            let x = problem.space().flatten(blocks);
            (problem.constraint_residual(&x) < 1e-10 && linalg::min_eigenvalue(&blocks[0]) > -1e-12).then_some(())
        });
        let (blocks, _) = out.witness.expect("boundary point found");
        assert!((blocks[0][(0, 1)].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn polyhedron_projection_matches_hand_solution() {
        let problem = correlation_problem(0.8);
        let space = problem.space().clone();
        let x = space.flatten(&[CMatrix::zeros(2, 2)]);
        let y = space.unflatten(&problem.project_polyhedron(&x).unwrap());
        assert!((y[0][(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((y[0][(0, 1)].re - 0.8).abs() < 1e-12);
        assert!((y[0][(1, 0)].re - 0.8).abs() < 1e-12);
    }
}

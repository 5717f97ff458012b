//! Time-covariant channels, covariant POVMs and quantum/classical transfer.
//!
//! A channel G is covariant when `G ∘ α_t = α̃_t ∘ G` for all t. With integer
//! spectra this is equivalent to a Kraus decomposition in which every
//! operator carries a fixed energy shift λ: it maps input energy n to output
//! energy n − λ. In the Choi picture covariance means that the Choi matrix,
//! written in the energy eigenbases, has no entries between pairs
//! (output m, input n) of different shift `n − m`. The Choi matrix is then
//! stored as one PSD block per shift.
//!
//! Choi convention: `G(ρ)_{mm'} = Σ J_{(m,n),(m',n')} ρ_{nn'}`, so a Kraus
//! operator A contributes `J += vec(A) vec(A)†`.

use crate::clock::{ClassicalCircleClock, HamiltonianSpec, QuantumClock, ValidationReport, Check};
use crate::error::{Result, TempusError};
use crate::linalg::{self, c64, CMatrix, ZERO};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use rand_distr::StandardNormal;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

pub const GRADING_TOLERANCE: f64 = 1e-9;
pub const COMPLETENESS_TOLERANCE: f64 = 1e-9;
pub const CHOI_PSD_TOLERANCE: f64 = 1e-9;
pub const CHOI_TP_TOLERANCE: f64 = 1e-8;
pub const POVM_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_POVM_GRID: usize = 256;

/// Eigenvalues of ΣA†A below this (relative) are treated as kernel when
/// renormalizing a channel to trace preservation.
const REPAIR_KERNEL_CUTOFF: f64 = 1e-12;

/// Anything that maps input density matrices to output density matrices.
pub trait Channel {
    fn h_in(&self) -> &HamiltonianSpec;
    fn h_out(&self) -> &HamiltonianSpec;

    /// G(ρ) for ρ given in the computational basis.
    fn apply(&self, rho: &CMatrix) -> Result<CMatrix>;

    /// Applies the channel to a clock's state and attaches the output
    /// Hamiltonian. Round-off is cleaned (hermitized, trace renormalized).
    fn apply_clock(&self, clock: &QuantumClock) -> Result<QuantumClock> {
        let out = linalg::hermitize(&self.apply(clock.rho())?);
        let tr = linalg::trace(&out).re;
        if tr <= 0.0 {
            return Err(TempusError::InvalidState(format!("channel output has trace {tr:.3e}")));
        }
        QuantumClock::new(out * c64(1.0 / tr, 0.0), self.h_out().clone())
    }
}

fn check_input(rho: &CMatrix, h_in: &HamiltonianSpec) -> Result<()> {
    if rho.nrows() != rho.ncols() {
        return Err(TempusError::NotSquare { rows: rho.nrows(), cols: rho.ncols() });
    }
    if rho.nrows() != h_in.dim() {
        return Err(TempusError::DimensionMismatch { expected: h_in.dim(), found: rho.nrows() });
    }
    Ok(())
}

/// The pairs (output level m, input level n) of each energy shift
/// λ = E_in(n) − E_out(m), indexed in the energy eigenbases.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftLayout {
    levels_in: Vec<i64>,
    levels_out: Vec<i64>,
    shifts: Vec<i64>,
    pairs: Vec<Vec<(usize, usize)>>,
    /// (block, position) of pair (m, n), stored at m·d_in + n.
    slots: Vec<(usize, usize)>,
}

impl ShiftLayout {
    pub fn new(h_in: &HamiltonianSpec, h_out: &HamiltonianSpec) -> Result<Self> {
        if h_in.dim() == 0 || h_out.dim() == 0 {
            return Err(TempusError::InvalidArgument("zero-dimensional system".into()));
        }
        let levels_in = h_in.integer_levels()?;
        let levels_out = h_out.integer_levels()?;
        let mut grouped: BTreeMap<i64, Vec<(usize, usize)>> = BTreeMap::new();
        for (m, &eo) in levels_out.iter().enumerate() {
            for (n, &ei) in levels_in.iter().enumerate() {
                grouped.entry(ei - eo).or_default().push((m, n));
            }
        }
        let d_in = levels_in.len();
        let mut slots = vec![(0, 0); levels_out.len() * d_in];
        let mut shifts = Vec::with_capacity(grouped.len());
        let mut pairs = Vec::with_capacity(grouped.len());
        for (b, (shift, list)) in grouped.into_iter().enumerate() {
            for (k, &(m, n)) in list.iter().enumerate() {
                slots[m * d_in + n] = (b, k);
            }
            shifts.push(shift);
            pairs.push(list);
        }
        Ok(Self { levels_in, levels_out, shifts, pairs, slots })
    }

    pub fn d_in(&self) -> usize {
        self.levels_in.len()
    }

    pub fn d_out(&self) -> usize {
        self.levels_out.len()
    }

    pub fn levels_in(&self) -> &[i64] {
        &self.levels_in
    }

    pub fn levels_out(&self) -> &[i64] {
        &self.levels_out
    }

    /// Shift values in increasing order; block `b` belongs to `shifts()[b]`.
    pub fn shifts(&self) -> &[i64] {
        &self.shifts
    }

    pub fn pairs(&self, block: usize) -> &[(usize, usize)] {
        &self.pairs[block]
    }

    pub fn block_count(&self) -> usize {
        self.shifts.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.pairs.iter().map(Vec::len).collect()
    }

    pub fn block_of_shift(&self, shift: i64) -> Option<usize> {
        self.shifts.binary_search(&shift).ok()
    }

    /// (block, position) of the pair (m, n).
    pub fn slot(&self, m: usize, n: usize) -> (usize, usize) {
        self.slots[m * self.d_in() + n]
    }

    pub fn zero_blocks(&self) -> Vec<CMatrix> {
        self.pairs.iter().map(|p| CMatrix::zeros(p.len(), p.len())).collect()
    }

    /// Adds vec(A)vec(A)† restricted to each shift block, for A in the
    /// energy bases. Entries of A across shifts are kept only in their own
    /// block, which is exactly the period average of the Kraus term.
    fn accumulate(&self, blocks: &mut [CMatrix], a_energy: &CMatrix) {
        for (b, pairs) in self.pairs.iter().enumerate() {
            let v: Vec<Complex64> = pairs.iter().map(|&(m, n)| a_energy[(m, n)]).collect();
            if v.iter().all(|z| *z == ZERO) {
                continue;
            }
            let block = &mut blocks[b];
            for i in 0..v.len() {
                for j in 0..v.len() {
                    block[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausOp {
    pub shift: i64,
    pub matrix: CMatrix,
}

/// Covariant channel as a list of Kraus operators with definite energy
/// shifts. Matrices are stored in the computational bases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::GradedKrausJson", into = "crate::io::GradedKrausJson")]
pub struct GradedKraus {
    ops: Vec<KrausOp>,
    h_in: HamiltonianSpec,
    h_out: HamiltonianSpec,
}

impl GradedKraus {
    /// Validates integer spectra, dimensions, grading and completeness.
    pub fn new(ops: Vec<KrausOp>, h_in: HamiltonianSpec, h_out: HamiltonianSpec) -> Result<Self> {
        let channel = Self::unchecked(ops, h_in, h_out)?;
        channel.h_in.integer_levels()?;
        channel.h_out.integer_levels()?;
        for (index, residual) in channel.grading_residuals().into_iter().enumerate() {
            if residual > GRADING_TOLERANCE {
                return Err(TempusError::GradingViolation { index, residual });
            }
        }
        let residual = channel.completeness_residual();
        if residual > COMPLETENESS_TOLERANCE {
            return Err(TempusError::NotTracePreserving { residual });
        }
        Ok(channel)
    }

    /// Checks dimensions only.
    pub fn unchecked(ops: Vec<KrausOp>, h_in: HamiltonianSpec, h_out: HamiltonianSpec) -> Result<Self> {
        for op in &ops {
            if op.matrix.ncols() != h_in.dim() {
                return Err(TempusError::DimensionMismatch { expected: h_in.dim(), found: op.matrix.ncols() });
            }
            if op.matrix.nrows() != h_out.dim() {
                return Err(TempusError::DimensionMismatch { expected: h_out.dim(), found: op.matrix.nrows() });
            }
        }
        Ok(Self { ops, h_in, h_out })
    }

    pub fn identity(h: &HamiltonianSpec) -> Self {
        let op = KrausOp { shift: 0, matrix: linalg::identity(h.dim()) };
        Self { ops: vec![op], h_in: h.clone(), h_out: h.clone() }
    }

    /// G(x) = σ·tr(x). Requires σ to commute with the output Hamiltonian.
    pub fn replacement(sigma: &CMatrix, h_in: &HamiltonianSpec, h_out: &HamiltonianSpec) -> Result<Self> {
        let levels_in = h_in.integer_levels()?;
        let levels_out = h_out.integer_levels()?;
        let target = QuantumClock::new(sigma.clone(), h_out.clone())?;
        let residual = target.stationarity_residual();
        if residual > 1e-9 {
            return Err(TempusError::NotStationary { residual });
        }
        // Diagonalize σ inside each output energy sector so every eigenvector
        // has a definite energy.
        let sigma_e = h_out.to_energy_basis(target.rho());
        let d_in = h_in.dim();
        let d_out = h_out.dim();
        let mut ops = Vec::new();
        for (level, members) in sectors(&levels_out) {
            let sub = CMatrix::from_fn(members.len(), members.len(), |i, j| sigma_e[(members[i], members[j])]);
            let (values, vectors) = linalg::eigh(&sub);
            for (k, &weight) in values.iter().enumerate() {
                if weight <= 0.0 {
                    continue;
                }
                let mut w = CMatrix::zeros(d_out, 1);
                for (i, &m) in members.iter().enumerate() {
                    w[(m, 0)] = vectors[(i, k)];
                }
                let w = h_out.basis() * w;
                for n in 0..d_in {
                    let mut bra = CMatrix::zeros(1, d_in);
                    bra[(0, n)] = c64(weight.sqrt(), 0.0);
                    let bra = bra * h_in.basis().adjoint();
                    ops.push(KrausOp { shift: levels_in[n] - level, matrix: &w * bra });
                }
            }
        }
        Self::new(ops, h_in.clone(), h_out.clone())
    }

    pub fn ops(&self) -> &[KrausOp] {
        &self.ops
    }

    /// ‖H_out A − A H_in + λA‖ for each operator.
    pub fn grading_residuals(&self) -> Vec<f64> {
        let hi = self.h_in.matrix();
        let ho = self.h_out.matrix();
        self.ops
            .iter()
            .map(|op| {
                let r = &ho * &op.matrix - &op.matrix * &hi + &op.matrix * c64(op.shift as f64, 0.0);
                linalg::max_abs(&r)
            })
            .collect()
    }

    pub fn completeness_residual(&self) -> f64 {
        linalg::max_abs(&(kraus_gram(self.ops.iter().map(|o| &o.matrix), self.h_in.dim()) - linalg::identity(self.h_in.dim())))
    }

    /// Run `self` first, then `next`.
    pub fn then(&self, next: &GradedKraus) -> Result<GradedKraus> {
        if self.h_out.dim() != next.h_in.dim() {
            return Err(TempusError::DimensionMismatch { expected: self.h_out.dim(), found: next.h_in.dim() });
        }
        let mut ops = Vec::with_capacity(self.ops.len() * next.ops.len());
        for b in &next.ops {
            for a in &self.ops {
                ops.push(KrausOp { shift: a.shift + b.shift, matrix: &b.matrix * &a.matrix });
            }
        }
        Ok(Self { ops, h_in: self.h_in.clone(), h_out: next.h_out.clone() })
    }

    pub fn to_choi(&self) -> Result<CovariantChoi> {
        let layout = ShiftLayout::new(&self.h_in, &self.h_out)?;
        let mut blocks = layout.zero_blocks();
        for op in &self.ops {
            let a = energy_operator(&op.matrix, &self.h_in, &self.h_out);
            layout.accumulate(&mut blocks, &a);
        }
        Ok(CovariantChoi { layout, blocks, h_in: self.h_in.clone(), h_out: self.h_out.clone() })
    }
}

impl Channel for GradedKraus {
    fn h_in(&self) -> &HamiltonianSpec {
        &self.h_in
    }

    fn h_out(&self) -> &HamiltonianSpec {
        &self.h_out
    }

    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_input(rho, &self.h_in)?;
        let mut out = CMatrix::zeros(self.h_out.dim(), self.h_out.dim());
        for op in &self.ops {
            out += &op.matrix * rho * op.matrix.adjoint();
        }
        Ok(out)
    }
}

/// Σ A†A
fn kraus_gram<'a>(ops: impl Iterator<Item = &'a CMatrix>, d_in: usize) -> CMatrix {
    let mut sum = CMatrix::zeros(d_in, d_in);
    for a in ops {
        sum += a.adjoint() * a;
    }
    sum
}

/// U_out† A U_in
fn energy_operator(a: &CMatrix, h_in: &HamiltonianSpec, h_out: &HamiltonianSpec) -> CMatrix {
    h_out.basis().adjoint() * a * h_in.basis()
}

/// Indices grouped by equal level, in increasing level order.
fn sectors(levels: &[i64]) -> BTreeMap<i64, Vec<usize>> {
    let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in levels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    map
}

/// Covariant channel as one Choi block per energy shift. Blocks are indexed
/// by the pairs of [`ShiftLayout`] in the energy eigenbases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::CovariantChoiJson", into = "crate::io::CovariantChoiJson")]
pub struct CovariantChoi {
    layout: ShiftLayout,
    blocks: Vec<CMatrix>,
    h_in: HamiltonianSpec,
    h_out: HamiltonianSpec,
}

impl CovariantChoi {
    /// Blocks keyed by shift; missing shifts are zero. Validates CP and TP.
    pub fn new(blocks: BTreeMap<i64, CMatrix>, h_in: HamiltonianSpec, h_out: HamiltonianSpec) -> Result<Self> {
        let layout = ShiftLayout::new(&h_in, &h_out)?;
        let mut dense = layout.zero_blocks();
        for (shift, block) in blocks {
            let b = layout
                .block_of_shift(shift)
                .ok_or_else(|| TempusError::InvalidArgument(format!("no level pair has shift {shift}")))?;
            if block.nrows() != dense[b].nrows() || block.ncols() != dense[b].ncols() {
                return Err(TempusError::DimensionMismatch { expected: dense[b].nrows(), found: block.nrows() });
            }
            dense[b] = block;
        }
        let choi = Self::from_layout(layout, dense, h_in, h_out)?;
        let psd = choi.psd_residual();
        if psd > CHOI_PSD_TOLERANCE {
            return Err(TempusError::InvalidArgument(format!("Choi block has eigenvalue {:.3e}", -psd)));
        }
        let residual = choi.tp_residual();
        if residual > CHOI_TP_TOLERANCE {
            return Err(TempusError::NotTracePreserving { residual });
        }
        Ok(choi)
    }

    /// Pairs blocks with a layout, checking only sizes.
    pub fn from_layout(
        layout: ShiftLayout,
        blocks: Vec<CMatrix>,
        h_in: HamiltonianSpec,
        h_out: HamiltonianSpec,
    ) -> Result<Self> {
        if blocks.len() != layout.block_count() {
            return Err(TempusError::DimensionMismatch { expected: layout.block_count(), found: blocks.len() });
        }
        for (b, size) in layout.block_sizes().into_iter().enumerate() {
            if blocks[b].nrows() != size || blocks[b].ncols() != size {
                return Err(TempusError::DimensionMismatch { expected: size, found: blocks[b].nrows() });
            }
        }
        Ok(Self { layout, blocks, h_in, h_out })
    }

    pub fn layout(&self) -> &ShiftLayout {
        &self.layout
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, shift: i64) -> Option<&CMatrix> {
        self.layout.block_of_shift(shift).map(|b| &self.blocks[b])
    }

    /// Shift-keyed view of the blocks, skipping all-zero ones.
    pub fn nonzero_blocks(&self) -> BTreeMap<i64, CMatrix> {
        self.layout
            .shifts()
            .iter()
            .zip(&self.blocks)
            .filter(|(_, b)| linalg::max_abs(b) > 0.0)
            .map(|(&s, b)| (s, b.clone()))
            .collect()
    }

    /// max(0, −smallest block eigenvalue)
    pub fn psd_residual(&self) -> f64 {
        self.blocks.iter().map(|b| (-linalg::min_eigenvalue(b)).max(0.0)).fold(0.0, f64::max)
    }

    /// T_{nn'} = Σ_m J_{(m,n),(m,n')}, the transpose of ΣA†A in the energy basis.
    pub fn tp_matrix(&self) -> CMatrix {
        let d_in = self.layout.d_in();
        let d_out = self.layout.d_out();
        CMatrix::from_fn(d_in, d_in, |n, n2| {
            (0..d_out)
                .filter_map(|m| {
                    let (b1, i) = self.layout.slot(m, n);
                    let (b2, j) = self.layout.slot(m, n2);
                    (b1 == b2).then(|| self.blocks[b1][(i, j)])
                })
                .sum()
        })
    }

    pub fn tp_residual(&self) -> f64 {
        linalg::max_abs(&(self.tp_matrix() - linalg::identity(self.layout.d_in())))
    }

    pub fn validate(&self) -> ValidationReport {
        ValidationReport::from_checks(vec![
            Check::new("completely_positive", self.psd_residual(), CHOI_PSD_TOLERANCE),
            Check::new("trace_preserving", self.tp_residual(), CHOI_TP_TOLERANCE),
        ])
    }

    /// Kraus operators from the block eigendecompositions.
    pub fn to_kraus(&self) -> GradedKraus {
        let ops = self
            .energy_kraus()
            .into_iter()
            .map(|(shift, a)| KrausOp { shift, matrix: self.h_out.basis() * a * self.h_in.basis().adjoint() })
            .collect();
        GradedKraus { ops, h_in: self.h_in.clone(), h_out: self.h_out.clone() }
    }

    /// Kraus operators in the energy bases, one per positive block eigenvalue.
    fn energy_kraus(&self) -> Vec<(i64, CMatrix)> {
        let scale = self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max);
        let mut ops = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            let (values, vectors) = linalg::eigh(block);
            for (k, &mu) in values.iter().enumerate() {
                if mu <= 1e-14 * scale {
                    continue;
                }
                let mut a = CMatrix::zeros(self.layout.d_out(), self.layout.d_in());
                for (i, &(m, n)) in self.layout.pairs(b).iter().enumerate() {
                    a[(m, n)] = vectors[(i, k)] * mu.sqrt();
                }
                ops.push((self.layout.shifts()[b], a));
            }
        }
        ops
    }

    /// Nearest trace-preserving channel in the sense A ↦ A·(ΣA†A)^{−1/2},
    /// taken per input energy sector so the grading survives. Directions in
    /// the kernel of ΣA†A are sent to the lowest output level.
    pub fn repair_trace_preserving(&self) -> CovariantChoi {
        let ops = self.energy_kraus();
        let d_in = self.layout.d_in();
        let gram = kraus_gram(ops.iter().map(|(_, a)| a), d_in);
        let scale = linalg::max_abs(&gram).max(1.0);
        let mut inv_sqrt = CMatrix::zeros(d_in, d_in);
        let mut kernel = Vec::new();
        for (&level, members) in &sectors(self.layout.levels_in()) {
            let sub = CMatrix::from_fn(members.len(), members.len(), |i, j| gram[(members[i], members[j])]);
            let (values, vectors) = linalg::eigh(&sub);
            for (k, &v) in values.iter().enumerate() {
                if v > REPAIR_KERNEL_CUTOFF * scale {
                    for (i, &a) in members.iter().enumerate() {
                        for (j, &b) in members.iter().enumerate() {
                            inv_sqrt[(a, b)] += vectors[(i, k)] * vectors[(j, k)].conj() / v.sqrt();
                        }
                    }
                } else {
                    let mut bra = CMatrix::zeros(1, d_in);
                    for (i, &a) in members.iter().enumerate() {
                        bra[(0, a)] = vectors[(i, k)].conj();
                    }
                    kernel.push((level, bra));
                }
            }
        }
        let mut blocks = self.layout.zero_blocks();
        for (_, a) in &ops {
            self.layout.accumulate(&mut blocks, &(a * &inv_sqrt));
        }
        let (lowest, _) = self
            .layout
            .levels_out()
            .iter()
            .enumerate()
            .min_by_key(|(_, &l)| l)
            .map(|(m, &l)| (m, l))
            .unwrap_or((0, 0));
        for (_, bra) in kernel {
            let mut a = CMatrix::zeros(self.layout.d_out(), d_in);
            a.row_mut(lowest).copy_from(&bra.row(0));
            self.layout.accumulate(&mut blocks, &a);
        }
        Self { layout: self.layout.clone(), blocks, h_in: self.h_in.clone(), h_out: self.h_out.clone() }
    }

    /// Run `self` first, then `next`.
    pub fn then(&self, next: &CovariantChoi) -> Result<CovariantChoi> {
        self.to_kraus().then(&next.to_kraus())?.to_choi()
    }
}

impl Channel for CovariantChoi {
    fn h_in(&self) -> &HamiltonianSpec {
        &self.h_in
    }

    fn h_out(&self) -> &HamiltonianSpec {
        &self.h_out
    }

    fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        check_input(rho, &self.h_in)?;
        let rho_e = self.h_in.to_energy_basis(rho);
        let d_out = self.layout.d_out();
        let mut out = CMatrix::zeros(d_out, d_out);
        for (b, block) in self.blocks.iter().enumerate() {
            let pairs = self.layout.pairs(b);
            for (i, &(m, n)) in pairs.iter().enumerate() {
                for (j, &(m2, n2)) in pairs.iter().enumerate() {
                    out[(m, m2)] += block[(i, j)] * rho_e[(n, n2)];
                }
            }
        }
        Ok(self.h_out.from_energy_basis(&out))
    }
}

/// Period average ∫₀¹ α̃_{−t} ∘ G ∘ α_t dt of an arbitrary channel given by
/// Kraus operators, computed by discarding the cross-shift Choi entries.
pub fn twirl_channel(kraus: &[CMatrix], h_in: &HamiltonianSpec, h_out: &HamiltonianSpec) -> Result<CovariantChoi> {
    let layout = ShiftLayout::new(h_in, h_out)?;
    for a in kraus {
        if a.nrows() != h_out.dim() || a.ncols() != h_in.dim() {
            return Err(TempusError::DimensionMismatch { expected: h_out.dim() * h_in.dim(), found: a.len() });
        }
    }
    let residual = linalg::max_abs(&(kraus_gram(kraus.iter(), h_in.dim()) - linalg::identity(h_in.dim())));
    if residual > COMPLETENESS_TOLERANCE {
        return Err(TempusError::NotTracePreserving { residual });
    }
    let mut blocks = layout.zero_blocks();
    for a in kraus {
        layout.accumulate(&mut blocks, &energy_operator(a, h_in, h_out));
    }
    CovariantChoi::from_layout(layout, blocks, h_in.clone(), h_out.clone())
}

/// max over `times` of ‖G(α_t ρ) − α̃_t G(ρ)‖₁.
pub fn covariance_residual(channel: &impl Channel, rho: &CMatrix, times: &[f64]) -> Result<f64> {
    let base = channel.apply(rho)?;
    let mut worst: f64 = 0.0;
    for &t in times {
        let u_in = channel.h_in().propagator(t);
        let u_out = channel.h_out().propagator(t);
        let moved = channel.apply(&(&u_in * rho * u_in.adjoint()))?;
        let expected = &u_out * &base * u_out.adjoint();
        worst = worst.max(linalg::trace_norm(&(moved - expected)));
    }
    Ok(worst)
}

/// Channel from a ladder input of dimension D = `d.len()` to a qubit with
/// H = diag(0,1), with Kraus operators A₀ = d₀|0⟩⟨0| and
/// A_j = c_j|0⟩⟨j−1| + d_j|1⟩⟨j| (j = 1..D, d_D absent).
///
/// `c` has length D + 1 and `c[0]` must vanish. Normalization requires
/// |c_n|² + |d_{n−1}|² = 1 for n = 1..D.
pub fn ladder_to_qubit_kraus(c: &[Complex64], d: &[Complex64]) -> Result<GradedKraus> {
    let dim = d.len();
    if dim == 0 {
        return Err(TempusError::InvalidArgument("need at least one input level".into()));
    }
    if c.len() != dim + 1 {
        return Err(TempusError::DimensionMismatch { expected: dim + 1, found: c.len() });
    }
    if c[0] != ZERO {
        return Err(TempusError::InvalidArgument("c_0 must be zero".into()));
    }
    for n in 1..=dim {
        let value = c[n].norm_sqr() + d[n - 1].norm_sqr();
        if (value - 1.0).abs() > COMPLETENESS_TOLERANCE {
            return Err(TempusError::KrausNormalization { index: n, value });
        }
    }
    let mut ops = Vec::with_capacity(dim + 1);
    let mut a0 = CMatrix::zeros(2, dim);
    a0[(0, 0)] = d[0];
    ops.push(KrausOp { shift: 0, matrix: a0 });
    for j in 1..=dim {
        let mut a = CMatrix::zeros(2, dim);
        a[(0, j - 1)] = c[j];
        if j < dim {
            a[(1, j)] = d[j];
        }
        ops.push(KrausOp { shift: j as i64 - 1, matrix: a });
    }
    GradedKraus::new(ops, HamiltonianSpec::ladder(dim), HamiltonianSpec::ladder(2))
}

/// The channel that pairs levels (0,1), (2,3), … and maps each pair onto the
/// qubit levels (0,1): c_j = d_j = 1 for odd j, zero otherwise.
pub fn pairing_channel(dim: usize) -> Result<GradedKraus> {
    let odd = |j: usize| if j % 2 == 1 { c64(1.0, 0.0) } else { ZERO };
    let c: Vec<Complex64> = (0..=dim).map(odd).collect();
    let d: Vec<Complex64> = (0..dim).map(odd).collect();
    ladder_to_qubit_kraus(&c, &d)
}

/// Attempts to build a channel of the above form mapping Σ f_n|n⟩ exactly
/// onto (|0⟩+|1⟩)/√2. Such a channel must satisfy c_n f_{n−1} = d_n f_n for
/// every n (with c_0 = 0 and f_D = 0), which together with the normalization
/// fixes every |c_n| and |d_n| in turn. Returns the channel, or the first
/// place where the forced values are impossible.
///
/// Every amplitude must be nonzero.
pub fn perfect_preparation_channel(amplitudes: &[Complex64]) -> Result<GradedKraus> {
    let dim = amplitudes.len();
    if dim == 0 {
        return Err(TempusError::InvalidArgument("empty amplitude list".into()));
    }
    if let Some(n) = amplitudes.iter().position(|f| f.norm() < 1e-14) {
        return Err(TempusError::InvalidArgument(format!("amplitude f_{n} vanishes")));
    }
    let tol = COMPLETENESS_TOLERANCE;
    let mut c = vec![ZERO; dim + 1];
    let mut d = vec![ZERO; dim];
    // n = 0: c_0 = 0 and f_0 ≠ 0 force d_0 = 0.
    for n in 1..=dim {
        let c_sq = 1.0 - d[n - 1].norm_sqr();
        if c_sq < -tol {
            return Err(TempusError::PreparationContradiction(format!(
                "|d_{}|^2 = {:.6} exceeds 1, so |c_{n}|^2 would be negative",
                n - 1,
                d[n - 1].norm_sqr()
            )));
        }
        c[n] = c64(c_sq.max(0.0).sqrt(), 0.0);
        if n == dim {
            // Beyond the support f_D = 0, so c_D f_{D−1} must vanish.
            if c[n].norm() > tol.sqrt() {
                return Err(TempusError::PreparationContradiction(format!(
                    "the top level needs c_{n} = 0 but normalization gives |c_{n}| = {:.6}",
                    c[n].norm()
                )));
            }
            c[n] = ZERO;
        } else {
            d[n] = c[n] * amplitudes[n - 1] / amplitudes[n];
            if d[n].norm_sqr() > 1.0 + tol {
                return Err(TempusError::PreparationContradiction(format!(
                    "c_{n} f_{} = d_{n} f_{n} forces |d_{n}| = {:.6} > 1",
                    n - 1,
                    d[n].norm()
                )));
            }
        }
    }
    // Forced values satisfy normalization up to rounding; tidy it exactly.
    for n in 1..dim {
        let total = c[n].norm_sqr() + d[n - 1].norm_sqr();
        if total > 0.0 {
            c[n] /= total.sqrt();
        }
    }
    ladder_to_qubit_kraus(&c, &d)
}

/// Time-covariant measurement sampled on the grid t_k = k/N of period
/// fractions, with (1/N)·Σ M(t_k) = 1. Integer spectra have period 2π, so
/// M(t_k) = e^{−2πiHt_k} M(0) e^{2πiHt_k}.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariantPovm {
    effects: Vec<CMatrix>,
    hamiltonian: HamiltonianSpec,
}

impl CovariantPovm {
    /// Validates positivity, completeness and covariance.
    pub fn new(effects: Vec<CMatrix>, hamiltonian: HamiltonianSpec) -> Result<Self> {
        let d = hamiltonian.dim();
        let n = effects.len();
        if n == 0 {
            return Err(TempusError::InvalidArgument("empty effect list".into()));
        }
        let mut sum = CMatrix::zeros(d, d);
        for (index, e) in effects.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(TempusError::DimensionMismatch { expected: d, found: e.nrows() });
            }
            let min = linalg::min_eigenvalue(e);
            if min < -POVM_TOLERANCE {
                return Err(TempusError::NonPositiveEffect { index, min_eigenvalue: min });
            }
            sum += e;
        }
        let residual = linalg::max_abs(&(sum / c64(n as f64, 0.0) - linalg::identity(d)));
        if residual > POVM_TOLERANCE {
            return Err(TempusError::IncompletePovm { residual });
        }
        let povm = Self { effects, hamiltonian };
        let covariance = povm.covariance_residual();
        if covariance > POVM_TOLERANCE {
            return Err(TempusError::InvalidArgument(format!("effects are not covariant (residual {covariance:.3e})")));
        }
        Ok(povm)
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    pub fn grid_size(&self) -> usize {
        self.effects.len()
    }

    /// max_k ‖M(t_k) − U_k M(0) U_k†‖ with U_k the evolution over the
    /// fraction t_k of the period 2π.
    pub fn covariance_residual(&self) -> f64 {
        let n = self.effects.len() as f64;
        self.effects
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let u = self.hamiltonian.propagator(TAU * k as f64 / n);
                linalg::max_abs(&(e - &u * &self.effects[0] * u.adjoint()))
            })
            .fold(0.0, f64::max)
    }

    pub fn completeness_residual(&self) -> f64 {
        let d = self.hamiltonian.dim();
        let sum = self.effects.iter().fold(CMatrix::zeros(d, d), |acc, e| acc + e);
        linalg::max_abs(&(sum / c64(self.effects.len() as f64, 0.0) - linalg::identity(d)))
    }

    /// Outcome density tr(ρ M(t_k)) on the grid.
    pub fn density(&self, rho: &CMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| linalg::trace_product_re(rho, e)).collect()
    }
}

/// M(t) = |e_t⟩⟨e_t| with |e_t⟩ = Σ_n e^{−2πi E_n t}|n⟩ for a nondegenerate
/// integer spectrum. Completeness on the grid needs N above the spread of
/// the spectrum.
pub fn canonical_phase_povm(hamiltonian: &HamiltonianSpec, grid: usize) -> Result<CovariantPovm> {
    let levels = hamiltonian.integer_levels()?;
    let mut sorted = levels.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(TempusError::DegenerateSpectrum { level: w[0] });
    }
    let spread = sorted.last().unwrap_or(&0) - sorted.first().unwrap_or(&0);
    if (grid as i64) <= spread {
        return Err(TempusError::InvalidArgument(format!(
            "grid size {grid} must exceed the spectral spread {spread}"
        )));
    }
    let d = levels.len();
    let effects = (0..grid)
        .map(|k| {
            let t = k as f64 / grid as f64;
            let v = CMatrix::from_fn(d, 1, |n, _| {
                Complex64::from_polar(1.0, -TAU * levels[n] as f64 * t)
            });
            hamiltonian.from_energy_basis(&(&v * v.adjoint()))
        })
        .collect();
    CovariantPovm::new(effects, hamiltonian.clone())
}

/// Canonical phase measurement of the ladder Hamiltonian 0..d−1.
pub fn canonical_phase_povm_ladder(d: usize, grid: usize) -> Result<CovariantPovm> {
    canonical_phase_povm(&HamiltonianSpec::ladder(d), grid)
}

/// Reads the clock with a covariant measurement: p(t_k) = tr(ρ M(t_k)).
/// The pointer turns once per period 2π of the quantum clock, so ω = 1.
pub fn q2c_transfer(clock: &QuantumClock, povm: &CovariantPovm) -> Result<ClassicalCircleClock> {
    if clock.dim() != povm.hamiltonian.dim() {
        return Err(TempusError::DimensionMismatch { expected: povm.hamiltonian.dim(), found: clock.dim() });
    }
    let density: Vec<f64> = povm.density(clock.rho()).into_iter().map(|p| p.max(0.0)).collect();
    ClassicalCircleClock::from_profile(density, 1.0)
}

/// Prepares a quantum clock from a classical one: ρ = (1/N)Σ p(t_k)·σ_{τ_k}
/// where σ is the seed state and τ_k = t_k·2π/ω is the time at which the
/// classical pointer reads t_k.
pub fn c2q_prepare(measure: &ClassicalCircleClock, seed: &QuantumClock) -> Result<QuantumClock> {
    if measure.omega() == 0.0 {
        return Err(TempusError::InvalidArgument("classical clock does not move (ω = 0)".into()));
    }
    let n = measure.grid_size();
    let d = seed.dim();
    let mut rho = CMatrix::zeros(d, d);
    for (k, &p) in measure.density().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let tau = k as f64 / n as f64 * TAU / measure.omega();
        rho += seed.evolve(tau).rho() * c64(p / n as f64, 0.0);
    }
    let rho = linalg::hermitize(&rho);
    let tr = linalg::trace(&rho).re;
    QuantumClock::new(rho * c64(1.0 / tr, 0.0), seed.hamiltonian().clone())
}

/// Random covariant channel: `rank` Kraus operators per shift with
/// independent complex Gaussian entries on that shift's level pairs,
/// renormalized to trace preservation.
pub fn random_covariant_channel<R: Rng + ?Sized>(
    h_in: &HamiltonianSpec,
    h_out: &HamiltonianSpec,
    rank: usize,
    rng: &mut R,
) -> Result<CovariantChoi> {
    let layout = ShiftLayout::new(h_in, h_out)?;
    let mut blocks = layout.zero_blocks();
    for (b, block) in blocks.iter_mut().enumerate() {
        let size = layout.pairs(b).len();
        for _ in 0..rank.max(1) {
            let v: Vec<Complex64> = (0..size)
                .map(|_| c64(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            for i in 0..size {
                for j in 0..size {
                    block[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
    }
    Ok(CovariantChoi::from_layout(layout, blocks, h_in.clone(), h_out.clone())?.repair_trace_preserving())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::HamiltonianSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus() -> QuantumClock {
        QuantumClock::pure_real(&[1.0, 1.0], HamiltonianSpec::ladder(2)).unwrap()
    }

    fn uniform_state(d: usize) -> QuantumClock {
        QuantumClock::pure_real(&vec![1.0; d], HamiltonianSpec::ladder(d)).unwrap()
    }

    #[test]
    fn identity_choi_is_scaled_maximally_entangled_projector() {
        let h = HamiltonianSpec::ladder(3);
        let choi = GradedKraus::identity(&h).to_choi().unwrap();
        let block = choi.block(0).unwrap();
        assert_eq!(block.nrows(), 3);
        assert!(linalg::max_abs(&(block - CMatrix::from_element(3, 3, c64(1.0, 0.0)))) < 1e-15);
        assert_eq!(choi.nonzero_blocks().len(), 1);
        let rho = uniform_state(3);
        assert!(linalg::max_abs(&(choi.apply(rho.rho()).unwrap() - rho.rho())) < 1e-14);
    }

    #[test]
    fn pairing_channel_maps_uniform_four_level_state_to_plus() {
        let channel = pairing_channel(4).unwrap();
        let out = channel.apply(uniform_state(4).rho()).unwrap();
        assert!(linalg::max_abs(&(out - plus().rho())) < 1e-12);
        let choi = channel.to_choi().unwrap();
        let out = choi.apply(uniform_state(4).rho()).unwrap();
        assert!(linalg::max_abs(&(out - plus().rho())) < 1e-12);
        assert!(choi.tp_residual() < 1e-14);
    }

    #[test]
    fn kraus_form_rejects_bad_normalization() {
        let c = [ZERO, c64(1.0, 0.0)];
        let d = [c64(1.0, 0.0)];
        match ladder_to_qubit_kraus(&c, &d) {
            Err(TempusError::KrausNormalization { index, value }) => {
                assert_eq!(index, 1);
                assert!((value - 2.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decreasing_first_amplitudes_contradict_perfect_preparation() {
        let coherent = crate::clock::coherent_state(c64(0.5, 0.0), 12).unwrap();
        let f: Vec<Complex64> = (0..12).map(|n| coherent.rho()[(n, 0)] / coherent.rho()[(0, 0)].sqrt()).collect();
        assert!(f[1].norm() < f[0].norm());
        match perfect_preparation_channel(&f) {
            Err(TempusError::PreparationContradiction(msg)) => assert!(msg.contains("d_1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn perfect_preparation_from_four_uniform_levels_is_the_pairing_channel() {
        let f = vec![c64(0.5, 0.0); 4];
        let channel = perfect_preparation_channel(&f).unwrap();
        let expected = pairing_channel(4).unwrap();
        let rho = uniform_state(4);
        let a = channel.apply(rho.rho()).unwrap();
        assert!(linalg::max_abs(&(a - expected.apply(rho.rho()).unwrap())) < 1e-14);
        assert!(perfect_preparation_channel(&[c64(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn replacement_channel_outputs_sigma() {
        let h_in = HamiltonianSpec::ladder(3);
        let h_out = HamiltonianSpec::ladder(2);
        let sigma = linalg::diag_real(&[0.3, 0.7]);
        let channel = GradedKraus::replacement(&sigma, &h_in, &h_out).unwrap();
        let out = channel.apply(uniform_state(3).rho()).unwrap();
        assert!(linalg::max_abs(&(out - &sigma)) < 1e-14);
        let not_stationary = plus();
        assert!(GradedKraus::replacement(not_stationary.rho(), &h_in, &h_out).is_err());
    }

    #[test]
    fn twirl_of_covariant_channel_is_unchanged() {
        let channel = pairing_channel(4).unwrap();
        let kraus: Vec<CMatrix> = channel.ops().iter().map(|o| o.matrix.clone()).collect();
        let twirled = twirl_channel(&kraus, channel.h_in(), channel.h_out()).unwrap();
        let direct = channel.to_choi().unwrap();
        for (a, b) in twirled.blocks().iter().zip(direct.blocks()) {
            assert!(linalg::max_abs(&(a - b)) < 1e-14);
        }
    }

    #[test]
    fn phase_povm_on_plus_gives_raised_cosine() {
        let povm = canonical_phase_povm_ladder(2, 256).unwrap();
        assert!(povm.completeness_residual() < 1e-10);
        assert!(povm.covariance_residual() < 1e-9);
        let classical = q2c_transfer(&plus(), &povm).unwrap();
        for (k, p) in classical.density().iter().enumerate() {
            let t = k as f64 / 256.0;
            assert!((p - (1.0 + (2.0 * std::f64::consts::PI * t).cos())).abs() < 1e-12);
        }
        let trivial = canonical_phase_povm_ladder(1, 8).unwrap();
        assert!(trivial.effects().iter().all(|e| (e[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn degenerate_spectrum_is_rejected_by_phase_povm() {
        let h = HamiltonianSpec::diagonal(vec![0.0, 1.0, 1.0]);
        assert!(matches!(canonical_phase_povm(&h, 16), Err(TempusError::DegenerateSpectrum { level: 1 })));
    }

    #[test]
    fn preparation_from_point_and_uniform_measures() {
        let seed = plus();
        let point = ClassicalCircleClock::grid_delta(64, 0, 1.0);
        let out = c2q_prepare(&point, &seed).unwrap();
        assert!(linalg::max_abs(&(out.rho() - seed.rho())) < 1e-14);
        let uniform = ClassicalCircleClock::uniform(64, 1.0);
        let out = c2q_prepare(&uniform, &seed).unwrap();
        assert!(linalg::max_abs(&(out.rho() - linalg::diag_real(&[0.5, 0.5]))) < 1e-14);
    }

    #[test]
    fn random_channels_are_valid_and_covariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h_in = HamiltonianSpec::ladder(3);
        let h_out = HamiltonianSpec::diagonal(vec![0.0, 2.0]);
        let times: Vec<f64> = (0..16).map(|k| 0.037 + k as f64 / 16.0).collect();
        for _ in 0..20 {
            let choi = random_covariant_channel(&h_in, &h_out, 2, &mut rng).unwrap();
            assert!(choi.validate().valid, "{:?}", choi.validate());
            let r = covariance_residual(&choi, uniform_state(3).rho(), &times).unwrap();
            assert!(r < 1e-12);
            let kraus = choi.to_kraus();
            assert!(kraus.completeness_residual() < 1e-9);
            assert!(kraus.grading_residuals().iter().all(|&g| g < 1e-9));
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let channel = pairing_channel(4).unwrap();
        assert!(matches!(channel.apply(plus().rho()), Err(TempusError::DimensionMismatch { .. })));
    }
}

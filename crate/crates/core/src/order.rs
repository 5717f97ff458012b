//! The quasi-order of clocks: (ρ,H) ≥ (ρ̃,H̃) when some covariant CP-TP map
//! sends ρ to ρ̃.
//!
//! Existence of such a map is a feasibility problem in the block-structured
//! Choi space of [`crate::channels`]: PSD blocks, trace preservation, and the
//! linear output condition G(ρ) = ρ̃. It is decided by Dykstra alternating
//! projections. Candidates are always checked after an exact repair to trace
//! preservation, so a reported witness is a genuine channel and its output
//! error is measured, not inferred from the projection residual.

use crate::channels::{Channel, CovariantChoi, GradedKraus, ShiftLayout};
use crate::clock::{ClassicalCircleClock, HamiltonianSpec, QuantumClock};
use crate::dykstra::{self, BlockSpace, DykstraSettings, FeasibilityProblem, Halfspace};
use crate::error::{Result, TempusError};
use crate::fisher;
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::spectral;
use log::{debug, info};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ORDER_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_FIDELITY_TOLERANCE: f64 = 1e-4;
pub const BISECTION_STEPS: usize = 20;
pub const CLASSICAL_MODE_CUTOFF: f64 = 1e-10;
pub const NEGATIVITY_REPAIR_ROUNDS: usize = 1_000;

/// Purity above which a target counts as a pure state.
const PURE_TARGET_PURITY: f64 = 1.0 - 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderResiduals {
    /// How the witness was obtained: "identity", "replacement" or "dykstra".
    pub method: String,
    /// ‖G(ρ) − ρ̃‖₁ of the reported channel (the witness, or the best
    /// candidate when infeasible).
    pub output_error: Option<f64>,
    pub cp_residual: Option<f64>,
    pub tp_residual: Option<f64>,
    /// Last and smallest distance between the two alternating iterates.
    pub final_residual: f64,
    pub best_residual: f64,
    pub history_len: usize,
    pub stalled: bool,
    pub affine_inconsistent: bool,
    /// Upper end of the fidelity bisection bracket, for pure targets.
    pub fidelity_upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderVerdict {
    pub feasible: bool,
    /// Fidelity (squared root fidelity) between the best channel output
    /// found and the target.
    pub fidelity_achieved: f64,
    pub witness_channel: Option<CovariantChoi>,
    pub iterations: usize,
    pub residuals: OrderResiduals,
}

/// Result of the fidelity bisection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepFidelity {
    /// Largest fidelity certified by an actual channel.
    pub fidelity: f64,
    /// Smallest level found infeasible (1 if none was).
    pub upper_bound: f64,
    pub witness: CovariantChoi,
    pub iterations: usize,
    pub bisection_steps: usize,
}

/// Linear constraints on covariant Choi blocks for a fixed input state.
pub(crate) struct ChannelProblem {
    pub layout: ShiftLayout,
    pub space: BlockSpace,
    pub h_in: HamiltonianSpec,
    pub h_out: HamiltonianSpec,
    /// Input state in the input energy basis.
    pub rho_e: CMatrix,
}

impl ChannelProblem {
    pub fn new(rho: &CMatrix, h_in: &HamiltonianSpec, h_out: &HamiltonianSpec) -> Result<Self> {
        let layout = ShiftLayout::new(h_in, h_out)?;
        let space = BlockSpace::new(layout.block_sizes());
        Ok(Self { rho_e: h_in.to_energy_basis(rho), layout, space, h_in: h_in.clone(), h_out: h_out.clone() })
    }

    /// Row r with Σ r_k x_k = tr(W G(ρ)) for W given in the output energy basis.
    pub fn functional_row(&self, w_e: &CMatrix) -> CVector {
        let mut row = CVector::zeros(self.space.dim());
        for b in 0..self.layout.block_count() {
            let pairs = self.layout.pairs(b);
            for (i, &(m, n)) in pairs.iter().enumerate() {
                for (j, &(m2, n2)) in pairs.iter().enumerate() {
                    row[self.space.index(b, i, j)] = self.rho_e[(n, n2)] * w_e[(m2, m)];
                }
            }
        }
        row
    }

    /// Rows and right-hand sides of Σ_m J_{(m,n),(m,n')} = δ_{nn'}.
    pub fn trace_preserving_rows(&self) -> (Vec<CVector>, Vec<Complex64>) {
        let d_in = self.layout.d_in();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for n in 0..d_in {
            for n2 in 0..d_in {
                let mut row = CVector::zeros(self.space.dim());
                let mut any = false;
                for m in 0..self.layout.d_out() {
                    let (b1, i) = self.layout.slot(m, n);
                    let (b2, j) = self.layout.slot(m, n2);
                    if b1 == b2 {
                        row[self.space.index(b1, i, j)] = c64(1.0, 0.0);
                        any = true;
                    }
                }
                if any || n == n2 {
                    rows.push(row);
                    rhs.push(c64(if n == n2 { 1.0 } else { 0.0 }, 0.0));
                }
            }
        }
        (rows, rhs)
    }

    /// Rows fixing every entry of G(ρ) to the target (energy basis).
    pub fn output_rows(&self, target_e: &CMatrix) -> (Vec<CVector>, Vec<Complex64>) {
        let d = self.layout.d_out();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for m in 0..d {
            for m2 in 0..d {
                // G(ρ)_{m m2} = tr(E_{m2 m} G(ρ))
                let mut w = CMatrix::zeros(d, d);
                w[(m2, m)] = c64(1.0, 0.0);
                rows.push(self.functional_row(&w));
                rhs.push(target_e[(m, m2)]);
            }
        }
        (rows, rhs)
    }

    pub fn build(&self, rows: Vec<CVector>, rhs: Vec<Complex64>, halfspaces: Vec<Halfspace>) -> FeasibilityProblem {
        let mut a = CMatrix::zeros(rows.len(), self.space.dim());
        for (r, row) in rows.iter().enumerate() {
            a.row_mut(r).copy_from(&row.transpose());
        }
        FeasibilityProblem::new(self.space.clone(), a, CVector::from_vec(rhs), halfspaces)
    }

    /// Turns PSD blocks into a trace-preserving covariant channel.
    pub fn channel(&self, blocks: &[CMatrix]) -> CovariantChoi {
        let psd: Vec<CMatrix> = blocks.iter().map(linalg::project_psd).collect();
        CovariantChoi::from_layout(self.layout.clone(), psd, self.h_in.clone(), self.h_out.clone())
            .expect("blocks follow the layout")
            .repair_trace_preserving()
    }
}

fn check_dims(resource: &QuantumClock, target: &QuantumClock) -> Result<()> {
    if resource.dim() == 0 || target.dim() == 0 {
        return Err(TempusError::InvalidArgument("zero-dimensional clock".into()));
    }
    resource.hamiltonian().integer_levels()?;
    target.hamiltonian().integer_levels()?;
    Ok(())
}

/// Leading eigenvector of a (nearly) pure state.
fn pure_vector(rho: &CMatrix) -> CVector {
    let (values, vectors) = linalg::eigh(rho);
    let top = values.len() - 1;
    vectors.column(top).into_owned()
}

fn squared_fidelity(a: &CMatrix, b: &CMatrix) -> f64 {
    fisher::fidelity(a, b).map(|f| f * f).unwrap_or(0.0)
}

/// Decides whether `resource ≥ target`. A channel is accepted when its
/// output is within `tol` of the target in trace norm.
pub fn order_feasible(resource: &QuantumClock, target: &QuantumClock, tol: f64) -> Result<OrderVerdict> {
    order_feasible_with(resource, target, tol, &DykstraSettings::default())
}

pub fn order_feasible_with(
    resource: &QuantumClock,
    target: &QuantumClock,
    tol: f64,
    settings: &DykstraSettings,
) -> Result<OrderVerdict> {
    check_dims(resource, target)?;
    let h_in = resource.hamiltonian();
    let h_out = target.hamiltonian();
    let exact = |method: &str, channel: CovariantChoi| -> Result<OrderVerdict> {
        let out = channel.apply(resource.rho())?;
        Ok(OrderVerdict {
            feasible: true,
            fidelity_achieved: squared_fidelity(&out, target.rho()),
            iterations: 0,
            residuals: OrderResiduals {
                method: method.into(),
                output_error: Some(linalg::trace_norm(&(out - target.rho()))),
                cp_residual: Some(channel.psd_residual()),
                tp_residual: Some(channel.tp_residual()),
                final_residual: 0.0,
                best_residual: 0.0,
                history_len: 0,
                stalled: false,
                affine_inconsistent: false,
                fidelity_upper: None,
            },
            witness_channel: Some(channel),
        })
    };

    // Two witnesses that need no search.
    if h_in == h_out && linalg::trace_norm(&(resource.rho() - target.rho())) <= tol {
        return exact("identity", GradedKraus::identity(h_in).to_choi()?);
    }
    if target.stationarity_residual() <= 1e-12 {
        return exact("replacement", GradedKraus::replacement(target.rho(), h_in, h_out)?.to_choi()?);
    }

    let problem = ChannelProblem::new(resource.rho(), h_in, h_out)?;
    let target_e = h_out.to_energy_basis(target.rho());
    let (mut rows, mut rhs) = problem.trace_preserving_rows();
    let (out_rows, out_rhs) = problem.output_rows(&target_e);
    rows.extend(out_rows);
    rhs.extend(out_rhs);
    let feasibility = problem.build(rows, rhs, Vec::new());
    let start = problem.layout.zero_blocks();

    let mut best: Option<(f64, CovariantChoi)> = None;
    let outcome = dykstra::solve(&feasibility, &start, settings, |blocks| {
        let channel = problem.channel(blocks);
        let out = channel.apply(resource.rho()).ok()?;
        let error = linalg::trace_norm(&(out - target.rho()));
        if best.as_ref().map_or(true, |(e, _)| error < *e) {
            best = Some((error, channel.clone()));
        }
        (error <= tol).then_some((error, channel))
    });
    info!(
        "order search: {} iterations, residual {:.3e}, witness {}",
        outcome.iterations,
        outcome.best_residual,
        outcome.witness.is_some()
    );

    let mut residuals = OrderResiduals {
        method: "dykstra".into(),
        output_error: None,
        cp_residual: None,
        tp_residual: None,
        final_residual: outcome.residual,
        best_residual: outcome.best_residual,
        history_len: outcome.history.len(),
        stalled: outcome.stalled,
        affine_inconsistent: outcome.affine_inconsistent,
        fidelity_upper: None,
    };
    if let Some((_, (error, channel))) = outcome.witness {
        let out = channel.apply(resource.rho())?;
        residuals.output_error = Some(error);
        residuals.cp_residual = Some(channel.psd_residual());
        residuals.tp_residual = Some(channel.tp_residual());
        return Ok(OrderVerdict {
            feasible: true,
            fidelity_achieved: squared_fidelity(&out, target.rho()),
            witness_channel: Some(channel),
            iterations: outcome.iterations,
            residuals,
        });
    }

    let mut fidelity_achieved = match &best {
        Some((error, channel)) => {
            residuals.output_error = Some(*error);
            residuals.cp_residual = Some(channel.psd_residual());
            residuals.tp_residual = Some(channel.tp_residual());
            squared_fidelity(&channel.apply(resource.rho())?, target.rho())
        }
        None => 0.0,
    };
    let mut iterations = outcome.iterations;
    if target.purity() > PURE_TARGET_PURITY {
        // The fidelity gap quantifies the infeasibility.
        let prep = max_prep_fidelity_with(resource, target, DEFAULT_FIDELITY_TOLERANCE, settings)?;
        iterations += prep.iterations;
        residuals.fidelity_upper = Some(prep.upper_bound);
        if prep.fidelity > fidelity_achieved {
            fidelity_achieved = prep.fidelity;
        }
        if prep.fidelity >= 1.0 - 10.0 * tol {
            debug!("fidelity bisection reached {:.8}; verdict is numerical only", prep.fidelity);
        }
    }
    Ok(OrderVerdict { feasible: false, fidelity_achieved, witness_channel: None, iterations, residuals })
}

/// Largest ⟨φ|G(ρ)|φ⟩ over covariant channels G, for a pure target |φ⟩,
/// by bisection on the level with a Dykstra feasibility test per level.
pub fn max_prep_fidelity(resource: &QuantumClock, target: &QuantumClock, tol: f64) -> Result<PrepFidelity> {
    max_prep_fidelity_with(resource, target, tol, &DykstraSettings::default())
}

pub fn max_prep_fidelity_with(
    resource: &QuantumClock,
    target: &QuantumClock,
    tol: f64,
    settings: &DykstraSettings,
) -> Result<PrepFidelity> {
    check_dims(resource, target)?;
    if target.purity() <= PURE_TARGET_PURITY {
        return Err(TempusError::InvalidArgument(format!(
            "target must be pure (purity {:.12})",
            target.purity()
        )));
    }
    let h_in = resource.hamiltonian();
    let h_out = target.hamiltonian();
    let problem = ChannelProblem::new(resource.rho(), h_in, h_out)?;
    let phi = h_out.basis().adjoint() * pure_vector(target.rho());
    let projector = &phi * phi.adjoint();
    let fidelity_row = problem.functional_row(&projector);
    let achieved = |channel: &CovariantChoi| -> f64 {
        channel.apply(resource.rho()).map(|out| linalg::trace_product_re(&out, target.rho())).unwrap_or(0.0)
    };

    // Start from the best fixed-output channel: prepare the energy-dephased target.
    let dephased = h_out.from_energy_basis(&CMatrix::from_fn(phi.len(), phi.len(), |i, j| {
        if h_out.eigenvalues()[i] == h_out.eigenvalues()[j] { phi[i] * phi[j].conj() } else { c64(0.0, 0.0) }
    }));
    let mut witness = GradedKraus::replacement(&dephased, h_in, h_out)?.to_choi()?;
    let mut lo = achieved(&witness);
    let mut hi = 1.0;
    let (tp_rows, tp_rhs) = problem.trace_preserving_rows();
    let mut iterations = 0;
    let mut steps = 0;
    let mut start = problem.layout.zero_blocks();
    while steps < BISECTION_STEPS && hi - lo > tol {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        // Aim slightly above the level so the repaired candidate clears it.
        let aim = (mid + 0.25 * tol).min(1.0);
        let feasibility = problem.build(
            tp_rows.clone(),
            tp_rhs.clone(),
            vec![Halfspace { row: fidelity_row.clone(), level: aim }],
        );
        let outcome = dykstra::solve(&feasibility, &start, settings, |blocks| {
            let channel = problem.channel(blocks);
            let f = achieved(&channel);
            (f >= mid).then_some((f, channel))
        });
        iterations += outcome.iterations;
        match outcome.witness {
            Some((blocks, (f, channel))) => {
                debug!("level {mid:.6}: feasible, achieved {f:.8} after {} iterations", outcome.iterations);
                lo = f.max(mid);
                witness = channel;
                start = blocks;
            }
            None => {
                debug!("level {mid:.6}: infeasible after {} iterations", outcome.iterations);
                hi = mid;
            }
        }
    }
    Ok(PrepFidelity { fidelity: achieved(&witness), upper_bound: hi, witness, iterations, bisection_steps: steps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOrderVerdict {
    pub feasible: bool,
    /// The measure ν with μ ⋆ ν = μ̃, when one was found.
    pub witness: Option<ClassicalCircleClock>,
    #[serde(with = "crate::io::extended_float")]
    pub min_density: f64,
    pub consistency_residual: f64,
    pub repair_rounds: usize,
    /// Mode index where μ̃ carries information that μ lacks.
    pub missing_mode: Option<i64>,
}

/// Decides μ ≥ μ̃ for classical circle clocks: does a probability density ν
/// with μ ⋆ ν = μ̃ exist? Modes where μ̂ vanishes are free; they start at 0
/// and are then adjusted by alternating between nonnegativity and the
/// determined modes.
pub fn classical_order(mu: &ClassicalCircleClock, mu_tilde: &ClassicalCircleClock, tol: f64) -> Result<ClassicalOrderVerdict> {
    let n = mu.grid_size();
    if mu_tilde.grid_size() != n {
        return Err(TempusError::GridMismatch(format!("grid sizes {} and {}", n, mu_tilde.grid_size())));
    }
    if mu.omega() != mu_tilde.omega() {
        return Err(TempusError::GridMismatch(format!("frequencies {} and {}", mu.omega(), mu_tilde.omega())));
    }
    let scale = 1.0 / n as f64;
    let a: Vec<Complex64> = spectral::fft_real(mu.density()).into_iter().map(|z| z * scale).collect();
    let b: Vec<Complex64> = spectral::fft_real(mu_tilde.density()).into_iter().map(|z| z * scale).collect();

    let mut determined = vec![None; n];
    for k in 0..n {
        if a[k].norm() > CLASSICAL_MODE_CUTOFF {
            determined[k] = Some(b[k] / a[k]);
        } else if b[k].norm() > tol {
            return Ok(ClassicalOrderVerdict {
                feasible: false,
                witness: None,
                min_density: f64::NAN,
                consistency_residual: b[k].norm(),
                repair_rounds: 0,
                missing_mode: Some(spectral::signed_mode(k, n)),
            });
        }
    }
    let restore = |spectrum: &mut [Complex64]| {
        for (z, d) in spectrum.iter_mut().zip(&determined) {
            *z = d.unwrap_or(*z);
        }
    };
    let mut spectrum: Vec<Complex64> = determined.iter().map(|d| d.unwrap_or(c64(0.0, 0.0))).collect();
    let to_density = |spectrum: &[Complex64]| -> Vec<f64> {
        spectral::ifft(&spectrum.iter().map(|z| z * n as f64).collect::<Vec<_>>()).iter().map(|z| z.re).collect()
    };
    let mut nu = to_density(&spectrum);
    let floor = |nu: &[f64]| -tol * nu.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut rounds = 0;
    while rounds < NEGATIVITY_REPAIR_ROUNDS && nu.iter().cloned().fold(f64::INFINITY, f64::min) < floor(&nu) {
        rounds += 1;
        let clipped: Vec<f64> = nu.iter().map(|v| v.max(0.0)).collect();
        spectrum = spectral::fft_real(&clipped).into_iter().map(|z| z * scale).collect();
        restore(&mut spectrum);
        nu = to_density(&spectrum);
    }
    let min_density = nu.iter().cloned().fold(f64::INFINITY, f64::min);
    let consistency_residual = (0..n).map(|k| (a[k] * spectrum[k] - b[k]).norm()).fold(0.0, f64::max);
    let feasible = min_density >= floor(&nu) && consistency_residual <= tol;
    let witness = if feasible {
        let density: Vec<f64> = nu.iter().map(|v| v.max(0.0)).collect();
        Some(ClassicalCircleClock::from_profile(density, mu.omega())?)
    } else {
        None
    };
    Ok(ClassicalOrderVerdict { feasible, witness, min_density, consistency_residual, repair_rounds: rounds, missing_mode: None })
}

//! Limits on copying timing information into two systems.
//!
//! A covariant channel from a resource clock into a bipartite output with
//! Hamiltonian H₁⊗1 + 1⊗H₂ produces two marginal clocks with Fisher
//! informations F₁, F₂. [`clone_bound_check`] evaluates the energy-dependent
//! bounds on them, [`broadcast_search`] looks for channels that make both
//! large, and [`exact_broadcast_feasible`] applies the commutation criterion
//! for perfect broadcasting of the whole family ρ_t.
//!
//! Bound report fields:
//! - `lhs`, `rhs`, `slack`: the chain 1/F₁ + 1/F₂ ≥ 2/F + 2/⟨E²⟩ as stated
//!   in the literature (not valid in general, see the crate README).
//! - `uncertainty_rhs`, `uncertainty_slack`: the bound 2/F + 1/(2⟨E²⟩) that
//!   follows from the Robertson relation for T₁ − T₂ and H₁ − H₂.
//! - `pure_state_bound`: for pure joint outputs, (1/F₁ + 1/F₂)/2 ≥
//!   1/F + 1/(F + ⟨E⟩²).

use crate::channels::{random_covariant_channel, Channel, CovariantChoi};
use crate::clock::{HamiltonianSpec, QuantumClock};
use crate::dykstra::{self, DykstraSettings, Halfspace};
use crate::error::{Result, TempusError};
use crate::fisher;
use crate::linalg::{self, c64, CMatrix};
use crate::order::ChannelProblem;
use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const BOUND_SLACK_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_BROADCAST_DIM_CAP: usize = 16;
pub const COMMUTATOR_TOLERANCE: f64 = 1e-9;
/// Joint outputs with purity above this get the pure-state bound.
const PURE_OUTPUT_PURITY: f64 = 1.0 - 1e-10;
/// Fisher information below this counts as zero (1/F reported as +∞).
const FISHER_ZERO: f64 = 1e-14;

/// A covariant channel from a resource clock into two output systems,
/// with the derived output quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BroadcastInstanceJson", into = "BroadcastInstanceJson")]
pub struct BroadcastInstance {
    pub resource: QuantumClock,
    pub output_h1: HamiltonianSpec,
    pub output_h2: HamiltonianSpec,
    pub joint_channel: CovariantChoi,
    pub joint_state: CMatrix,
    pub f1: f64,
    pub f2: f64,
    /// tr(σ (H₁⊗1 + 1⊗H₂)²)
    pub e2_mean: f64,
    pub e_mean: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BroadcastInstanceJson {
    pub resource: QuantumClock,
    pub output_h1: HamiltonianSpec,
    pub output_h2: HamiltonianSpec,
    pub joint_channel: CovariantChoi,
    /// Derived on output, ignored on input.
    #[serde(default)]
    pub f1: Option<f64>,
    #[serde(default)]
    pub f2: Option<f64>,
    #[serde(default)]
    pub e2_mean: Option<f64>,
    #[serde(default)]
    pub e_mean: Option<f64>,
}

impl From<BroadcastInstance> for BroadcastInstanceJson {
    fn from(i: BroadcastInstance) -> Self {
        Self {
            resource: i.resource,
            output_h1: i.output_h1,
            output_h2: i.output_h2,
            joint_channel: i.joint_channel,
            f1: Some(i.f1),
            f2: Some(i.f2),
            e2_mean: Some(i.e2_mean),
            e_mean: Some(i.e_mean),
        }
    }
}

impl TryFrom<BroadcastInstanceJson> for BroadcastInstance {
    type Error = TempusError;

    fn try_from(j: BroadcastInstanceJson) -> Result<Self> {
        BroadcastInstance::new(j.resource, j.output_h1, j.output_h2, j.joint_channel)
    }
}

impl BroadcastInstance {
    pub fn new(
        resource: QuantumClock,
        output_h1: HamiltonianSpec,
        output_h2: HamiltonianSpec,
        joint_channel: CovariantChoi,
    ) -> Result<Self> {
        if joint_channel.h_in() != resource.hamiltonian() {
            return Err(TempusError::InvalidArgument("channel input Hamiltonian differs from the resource's".into()));
        }
        let joint_h = output_h1.tensor_sum(&output_h2);
        if joint_channel.h_out() != &joint_h {
            return Err(TempusError::InvalidArgument("channel output Hamiltonian is not H₁⊗1 + 1⊗H₂".into()));
        }
        let joint = joint_channel.apply_clock(&resource)?;
        let (d1, d2) = (output_h1.dim(), output_h2.dim());
        let m1 = marginal_clock(joint.rho(), d1, d2, &output_h1, true)?;
        let m2 = marginal_clock(joint.rho(), d1, d2, &output_h2, false)?;
        Ok(Self {
            f1: fisher::quantum_fisher(&m1),
            f2: fisher::quantum_fisher(&m2),
            e2_mean: joint.energy_second_moment(),
            e_mean: joint.energy_mean(),
            joint_state: joint.rho().clone(),
            resource,
            output_h1,
            output_h2,
            joint_channel,
        })
    }

    pub fn joint_clock(&self) -> Result<QuantumClock> {
        QuantumClock::new(self.joint_state.clone(), self.output_h1.tensor_sum(&self.output_h2))
    }

    pub fn marginals(&self) -> Result<(QuantumClock, QuantumClock)> {
        let (d1, d2) = (self.output_h1.dim(), self.output_h2.dim());
        Ok((
            marginal_clock(&self.joint_state, d1, d2, &self.output_h1, true)?,
            marginal_clock(&self.joint_state, d1, d2, &self.output_h2, false)?,
        ))
    }

    pub fn objective(&self) -> f64 {
        self.f1.min(self.f2)
    }
}

fn marginal_clock(joint: &CMatrix, d1: usize, d2: usize, h: &HamiltonianSpec, first: bool) -> Result<QuantumClock> {
    let rho = if first { linalg::partial_trace_second(joint, d1, d2) } else { linalg::partial_trace_first(joint, d1, d2) };
    QuantumClock::new(linalg::hermitize(&rho), h.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureStateBound {
    /// (1/F₁ + 1/F₂)/2
    #[serde(with = "crate::io::extended_float")]
    pub lhs: f64,
    /// 1/F + 1/(F + ⟨E⟩²)
    #[serde(with = "crate::io::extended_float")]
    pub rhs: f64,
    #[serde(with = "crate::io::extended_float")]
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// 1/F₁ + 1/F₂
    #[serde(with = "crate::io::extended_float")]
    pub lhs: f64,
    /// 2/F + 2/⟨E²⟩
    #[serde(with = "crate::io::extended_float")]
    pub rhs: f64,
    #[serde(with = "crate::io::extended_float")]
    pub slack: f64,
    pub pass: bool,
    /// 2/F + 1/(2⟨E²⟩)
    #[serde(with = "crate::io::extended_float")]
    pub uncertainty_rhs: f64,
    #[serde(with = "crate::io::extended_float")]
    pub uncertainty_slack: f64,
    pub uncertainty_pass: bool,
    pub pure_state_bound: Option<PureStateBound>,
    pub resource_fisher: f64,
    pub f1: f64,
    pub f2: f64,
    pub e2_mean: f64,
    pub e_mean: f64,
}

fn inverse(f: f64) -> f64 {
    if f <= FISHER_ZERO { f64::INFINITY } else { 1.0 / f }
}

/// lhs − rhs with an infinite lhs always passing.
fn slack(lhs: f64, rhs: f64) -> f64 {
    if lhs.is_infinite() { f64::INFINITY } else { lhs - rhs }
}

/// Evaluates the copying bounds for one broadcast instance.
pub fn clone_bound_check(instance: &BroadcastInstance, resource_fisher: f64) -> Result<BoundReport> {
    for h in [&instance.output_h1, &instance.output_h2] {
        if let Some((index, &value)) = h.eigenvalues().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(TempusError::NegativeEnergy { index, value });
        }
    }
    let (f1, f2) = (instance.f1, instance.f2);
    let lhs = inverse(f1) + inverse(f2);
    let inv_f = inverse(resource_fisher);
    let inv_e2 = inverse(instance.e2_mean);
    let rhs = 2.0 * inv_f + 2.0 * inv_e2;
    let uncertainty_rhs = 2.0 * inv_f + 0.5 * inv_e2;
    let slack_chain = slack(lhs, rhs);
    let slack_uncertainty = slack(lhs, uncertainty_rhs);

    let joint_purity = linalg::trace_product_re(&instance.joint_state, &instance.joint_state);
    let pure_state_bound = (joint_purity > PURE_OUTPUT_PURITY).then(|| {
        let lhs = 0.5 * lhs;
        let rhs = inv_f + inverse(resource_fisher + instance.e_mean * instance.e_mean);
        let s = slack(lhs, rhs);
        PureStateBound { lhs, rhs, slack: s, pass: s >= -BOUND_SLACK_TOLERANCE }
    });
    Ok(BoundReport {
        lhs,
        rhs,
        slack: slack_chain,
        pass: slack_chain >= -BOUND_SLACK_TOLERANCE,
        uncertainty_rhs,
        uncertainty_slack: slack_uncertainty,
        uncertainty_pass: slack_uncertainty >= -BOUND_SLACK_TOLERANCE,
        pure_state_bound,
        resource_fisher,
        f1,
        f2,
        e2_mean: instance.e2_mean,
        e_mean: instance.e_mean,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Largest allowed d₁·d₂.
    pub dim_cap: usize,
    /// Alternations between observable updates and channel optimization.
    pub rounds: usize,
    pub bisection_steps: usize,
    /// Bisection stops once the bracket is narrower than this.
    pub tol: f64,
    pub settings: DykstraSettings,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            seed: 0,
            dim_cap: DEFAULT_BROADCAST_DIM_CAP,
            rounds: 6,
            bisection_steps: 12,
            tol: 1e-4,
            settings: DykstraSettings { max_iter: 1_500, stall_window: 200, ..Default::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Best channel found; its min(F₁, F₂) is a lower bound on the optimum.
    pub instance: BroadcastInstance,
    pub objective: f64,
    pub resource_fisher: f64,
    pub restarts: usize,
    pub dykstra_iterations: usize,
}

/// Heuristic maximization of min(F₁, F₂) over covariant channels from
/// `resource` into H₁⊗1 + 1⊗H₂.
///
/// Each restart starts from a random covariant channel and alternates two
/// steps: fix the marginal SLDs A₁, A₂ of the current channel, then bisect
/// on the level t of the constraints 2 tr(ρ̇ᵢAᵢ) − tr(ρᵢAᵢ²) ≥ t, which are
/// linear in the channel and imply Fᵢ ≥ t. The result is the best channel
/// seen, never claimed optimal.
pub fn broadcast_search(
    resource: &QuantumClock,
    h1: &HamiltonianSpec,
    h2: &HamiltonianSpec,
    config: &SearchConfig,
) -> Result<SearchResult> {
    let product = h1.dim() * h2.dim();
    if product > config.dim_cap {
        return Err(TempusError::TooLarge(format!("output dimension {product} exceeds cap {}", config.dim_cap)));
    }
    for h in [resource.hamiltonian(), h1, h2] {
        h.integer_levels()?;
    }
    let h_out = h1.tensor_sum(h2);
    let resource_fisher = fisher::quantum_fisher(resource);
    let problem = ChannelProblem::new(resource.rho(), resource.hamiltonian(), &h_out)?;
    let (tp_rows, tp_rhs) = problem.trace_preserving_rows();
    let (d1, d2) = (h1.dim(), h2.dim());
    let instance_of = |channel: CovariantChoi| BroadcastInstance::new(resource.clone(), h1.clone(), h2.clone(), channel);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<BroadcastInstance> = None;
    let mut iterations = 0;
    for restart in 0..config.restarts.max(1) {
        let mut current = instance_of(random_covariant_channel(resource.hamiltonian(), &h_out, 2, &mut rng)?)?;
        if resource_fisher > FISHER_ZERO {
            for _ in 0..config.rounds {
                let before = current.objective();
                let (m1, m2) = current.marginals()?;
                let a1 = fisher::sld(m1.rho(), &m1.rho_dot())?;
                let a2 = fisher::sld(m2.rho(), &m2.rho_dot())?;
                // tr(G(ρ̇)(A⊗1)) = tr(G(ρ) i[H_out, A⊗1]) by covariance.
                let w1 = linalg::kron(&(linalg::commutator(&h1.matrix(), &a1) * c64(0.0, 2.0) - &a1 * &a1), &linalg::identity(d2));
                let w2 = linalg::kron(&linalg::identity(d1), &(linalg::commutator(&h2.matrix(), &a2) * c64(0.0, 2.0) - &a2 * &a2));
                let rows = [problem.functional_row(&h_out.to_energy_basis(&w1)), problem.functional_row(&h_out.to_energy_basis(&w2))];

                let mut lo = before;
                let mut hi = resource_fisher;
                let mut start = current.joint_channel.blocks().to_vec();
                for _ in 0..config.bisection_steps {
                    if hi - lo <= config.tol {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    let aim = mid + 0.25 * config.tol;
                    let halfspaces = rows.iter().map(|row| Halfspace { row: row.clone(), level: aim }).collect();
                    let feasibility = problem.build(tp_rows.clone(), tp_rhs.clone(), halfspaces);
                    let outcome = dykstra::solve(&feasibility, &start, &config.settings, |blocks| {
                        let candidate = instance_of(problem.channel(blocks)).ok()?;
                        (candidate.objective() >= mid).then_some(candidate)
                    });
                    iterations += outcome.iterations;
                    match outcome.witness {
                        Some((blocks, candidate)) => {
                            lo = candidate.objective();
                            current = candidate;
                            start = blocks;
                        }
                        None => hi = mid,
                    }
                }
                if current.objective() - before < config.tol {
                    break;
                }
            }
        }
        debug!("restart {restart}: min(F1, F2) = {:.6}", current.objective());
        if best.as_ref().map_or(true, |b| current.objective() > b.objective()) {
            best = Some(current);
        }
    }
    let instance = best.expect("at least one restart");
    Ok(SearchResult {
        objective: instance.objective(),
        instance,
        resource_fisher,
        restarts: config.restarts.max(1),
        dykstra_iterations: iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BroadcastCheck {
    /// True iff every pair of evolved states commutes.
    pub broadcastable: bool,
    /// Largest Frobenius norm of [ρ_tᵢ, ρ_tⱼ].
    pub max_commutator: f64,
    pub worst_pair: Option<(f64, f64)>,
}

/// The family {ρ_t} can be broadcast exactly iff its members commute;
/// tested on the given times.
pub fn exact_broadcast_feasible(clock: &QuantumClock, times: &[f64]) -> Result<BroadcastCheck> {
    if times.len() < 2 {
        return Err(TempusError::InvalidArgument("need at least two times".into()));
    }
    let states: Vec<CMatrix> = times.iter().map(|&t| clock.evolve(t).rho().clone()).collect();
    let mut max_commutator = 0.0;
    let mut worst_pair = None;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let norm = linalg::fro_norm(&linalg::commutator(&states[i], &states[j]));
            if norm > max_commutator {
                max_commutator = norm;
                worst_pair = Some((times[i], times[j]));
            }
        }
    }
    Ok(BroadcastCheck { broadcastable: max_commutator < COMMUTATOR_TOLERANCE, max_commutator, worst_pair })
}

//! `tempus`: command-line access to clock Fisher information, the clock
//! order, copying bounds, synchronisms and signal splitting.
//!
//! Results go to stdout (or `--output`) as pretty JSON; `signal-split`
//! writes CSV. Errors are one JSON line on stderr. Exit status is 0 on
//! success (an infeasible verdict is a success), 1 on domain errors and 2
//! on usage, I/O and parse errors.

mod input;

use clap::{Args, Parser, Subcommand};
use input::{load, load_clock, load_quantum, CliError};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use tempus::channels::{self, Channel};
use tempus::clock::{Check, ValidationReport};
use tempus::cloning::{self, BroadcastInstance, BroadcastInstanceJson, SearchConfig};
use tempus::dykstra::DykstraSettings;
use tempus::fisher;
use tempus::io::{AnyClock, CovariantChoiJson, GradedKrausJson, HamiltonianJson, RawClock};
use tempus::order::{self, DEFAULT_FIDELITY_TOLERANCE, DEFAULT_ORDER_TOLERANCE};
use tempus::signal::{self, SWEEP_CSV_HEADER};
use tempus::sync::{self, Synchronism, SynchronismJson};
use tempus::{HamiltonianSpec, TempusError};

#[derive(Parser, Debug)]
#[command(name = "tempus", version, about = "Quantum and classical clock resources")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// Feasibility or bisection tolerance (defaults depend on the command).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for randomized searches.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Grid size for POVM discretization and signal wavefunctions.
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    /// Iteration cap of the alternating-projection solver.
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fisher timing information of a clock.
    Fisher {
        #[arg(long)]
        clock: PathBuf,
    },
    /// Decide resource ≥ target (quantum: covariant channel; classical: convolution).
    Order {
        #[arg(long)]
        resource: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Best preparation fidelity of a pure target from a resource.
    PrepFidelity {
        #[arg(long)]
        resource: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Quantum clock → classical reading (canonical phase POVM), or
    /// classical clock → quantum clock (measure and prepare from a seed).
    Transfer {
        #[arg(long)]
        clock: PathBuf,
        /// Quantum seed state, required when `--clock` is classical.
        #[arg(long)]
        seed_clock: Option<PathBuf>,
    },
    /// Evaluate the copying bounds for a broadcast channel.
    CloneBound {
        #[arg(long)]
        instance: PathBuf,
        /// Fisher information of the resource (computed when absent).
        #[arg(long)]
        resource_fisher: Option<f64>,
    },
    /// Search for a covariant channel maximizing min(F₁, F₂).
    BroadcastSearch {
        #[arg(long)]
        resource: PathBuf,
        /// Hamiltonian of the first output, {"eigenvalues": [...]}.
        #[arg(long)]
        h1: PathBuf,
        #[arg(long)]
        h2: PathBuf,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
    },
    /// Validate a synchronism and report its relative Fisher information;
    /// with `--target`, decide synchronism ≥ target.
    Sync {
        #[arg(long)]
        sync: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Split Gaussian signals into two halves and report timing information
    /// (CSV, one row per energy).
    SignalSplit {
        /// Mean energies, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 20.0, 50.0])]
        energies: Vec<f64>,
        /// Energy spread ΔE.
        #[arg(long, default_value_t = 1.0)]
        de: f64,
    },
    /// Check a clock, channel or synchronism file against its invariants.
    Validate {
        #[command(flatten)]
        target: ValidateTarget,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct ValidateTarget {
    #[arg(long)]
    clock: Option<PathBuf>,
    /// Choi-block channel file.
    #[arg(long)]
    channel: Option<PathBuf>,
    /// Graded Kraus channel file.
    #[arg(long)]
    kraus: Option<PathBuf>,
    #[arg(long)]
    sync: Option<PathBuf>,
}

#[derive(Serialize)]
struct FisherOutput {
    #[serde(rename = "F")]
    f: f64,
}

#[derive(Serialize)]
struct SyncOutput {
    validation: ValidationReport,
    relative_fisher: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_relative_fisher: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<order::OrderVerdict>,
}

enum Output {
    Json(String),
    Csv(String),
}

fn json<T: Serialize>(value: &T) -> Result<Output, CliError> {
    serde_json::to_string_pretty(value).map(Output::Json).map_err(|e| CliError::Io(e.to_string()))
}

fn settings(global: &GlobalArgs) -> DykstraSettings {
    let mut s = DykstraSettings::default();
    if let Some(n) = global.max_iter {
        s.max_iter = n;
    }
    s
}

fn run(cli: Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Fisher { clock } => {
            let f = match load_clock(&clock)? {
                AnyClock::Quantum(c) => fisher::quantum_fisher(&c),
                AnyClock::Classical(c) => fisher::classical_fisher(&c),
            };
            json(&FisherOutput { f })
        }
        Command::Order { resource, target } => match (load_clock(&resource)?, load_clock(&target)?) {
            (AnyClock::Quantum(r), AnyClock::Quantum(t)) => {
                json(&order::order_feasible_with(&r, &t, g.tol.unwrap_or(DEFAULT_ORDER_TOLERANCE), &settings(g))?)
            }
            (AnyClock::Classical(r), AnyClock::Classical(t)) => {
                json(&order::classical_order(&r, &t, g.tol.unwrap_or(DEFAULT_ORDER_TOLERANCE))?)
            }
            _ => Err(TempusError::InvalidArgument("resource and target must both be quantum or both classical".into()).into()),
        },
        Command::PrepFidelity { resource, target } => {
            let (r, t) = (load_quantum(&resource)?, load_quantum(&target)?);
            json(&order::max_prep_fidelity_with(&r, &t, g.tol.unwrap_or(DEFAULT_FIDELITY_TOLERANCE), &settings(g))?)
        }
        Command::Transfer { clock, seed_clock } => match load_clock(&clock)? {
            AnyClock::Quantum(c) => {
                let grid = g.grid_n.unwrap_or(channels::DEFAULT_POVM_GRID);
                let povm = channels::canonical_phase_povm(c.hamiltonian(), grid)?;
                json(&AnyClock::Classical(channels::q2c_transfer(&c, &povm)?))
            }
            AnyClock::Classical(c) => {
                let seed_path = seed_clock.ok_or_else(|| {
                    CliError::Usage("--seed-clock is required to prepare a quantum clock from a classical one".into())
                })?;
                let seed = load_quantum(&seed_path)?;
                json(&AnyClock::Quantum(channels::c2q_prepare(&c, &seed)?))
            }
        },
        Command::CloneBound { instance, resource_fisher } => {
            let instance: BroadcastInstance = load::<BroadcastInstanceJson, _>(&instance)?;
            let f = resource_fisher.unwrap_or_else(|| fisher::quantum_fisher(&instance.resource));
            json(&cloning::clone_bound_check(&instance, f)?)
        }
        Command::BroadcastSearch { resource, h1, h2, restarts } => {
            let resource = load_quantum(&resource)?;
            let h1: HamiltonianSpec = load::<HamiltonianJson, _>(&h1)?;
            let h2: HamiltonianSpec = load::<HamiltonianJson, _>(&h2)?;
            let mut config = SearchConfig { restarts, seed: g.seed, ..Default::default() };
            if let Some(tol) = g.tol {
                config.tol = tol;
            }
            if let Some(n) = g.max_iter {
                config.settings.max_iter = n;
            }
            json(&cloning::broadcast_search(&resource, &h1, &h2, &config)?)
        }
        Command::Sync { sync: path, target } => {
            let s: Synchronism = load::<SynchronismJson, _>(&path)?;
            let validation = sync::validate_synchronism(&s);
            let relative_fisher = sync::relative_fisher(&s)?;
            let (target_relative_fisher, order) = match target {
                Some(t) => {
                    let t: Synchronism = load::<SynchronismJson, _>(&t)?;
                    let verdict = order::order_feasible_with(
                        &sync::sync_to_clock(&s)?,
                        &sync::sync_to_clock(&t)?,
                        g.tol.unwrap_or(DEFAULT_ORDER_TOLERANCE),
                        &settings(g),
                    )?;
                    (Some(sync::relative_fisher(&t)?), Some(verdict))
                }
                None => (None, None),
            };
            json(&SyncOutput { validation, relative_fisher, target_relative_fisher, order })
        }
        Command::SignalSplit { energies, de } => {
            let n = g.grid_n.unwrap_or(signal::DEFAULT_SIGNAL_GRID);
            let mut csv = format!("{SWEEP_CSV_HEADER}\n");
            for e in energies {
                csv.push_str(&signal::sweep_row(e, de, n)?.to_csv());
                csv.push('\n');
            }
            Ok(Output::Csv(csv))
        }
        Command::Validate { target } => json(&validate(target)?),
    }
}

fn validate(target: ValidateTarget) -> Result<ValidationReport, CliError> {
    if let Some(path) = target.clock {
        return Ok(match input::parse::<RawClock>(&path)? {
            RawClock::Quantum(raw) => raw.into_unchecked()?.validate(),
            RawClock::Classical(raw) => {
                let mass = raw.density.iter().sum::<f64>() / raw.density.len().max(1) as f64;
                let negative = raw.density.iter().cloned().fold(0.0f64, f64::min);
                ValidationReport::from_checks(vec![
                    Check::new("normalization", (mass - 1.0).abs(), tempus::clock::CLASSICAL_NORM_TOLERANCE),
                    Check::new("nonnegativity", -negative, 0.0),
                ])
            }
        });
    }
    if let Some(path) = target.channel {
        return Ok(input::parse::<CovariantChoiJson>(&path)?.into_unchecked()?.validate());
    }
    if let Some(path) = target.kraus {
        let raw = input::parse::<GradedKrausJson>(&path)?;
        let ops = raw
            .kraus
            .into_iter()
            .map(|k| Ok(channels::KrausOp { shift: k.shift, matrix: k.matrix.try_into()? }))
            .collect::<tempus::Result<Vec<_>>>()?;
        let kraus = channels::GradedKraus::unchecked(ops, raw.h_in.try_into()?, raw.h_out.try_into()?)?;
        let grading = kraus.grading_residuals().into_iter().fold(0.0, f64::max);
        let mut checks = vec![
            Check::new("grading", grading, channels::GRADING_TOLERANCE),
            Check::new("completeness", kraus.completeness_residual(), channels::COMPLETENESS_TOLERANCE),
        ];
        for (name, h) in [("integer_input_spectrum", kraus.h_in()), ("integer_output_spectrum", kraus.h_out())] {
            checks.push(Check::new(name, if h.integer_levels().is_ok() { 0.0 } else { 1.0 }, 0.0));
        }
        return Ok(ValidationReport::from_checks(checks));
    }
    if let Some(path) = target.sync {
        let raw = input::parse::<SynchronismJson>(&path)?;
        let s = Synchronism::unchecked(raw.rho.try_into()?, raw.h_a, raw.h_b)?;
        return Ok(sync::validate_synchronism(&s));
    }
    unreachable!("clap requires exactly one validation target")
}

fn write_output(output: Output, path: Option<&PathBuf>) -> Result<(), CliError> {
    let text = match output {
        Output::Json(s) => s + "\n",
        Output::Csv(s) => s,
    };
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TEMPUS_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return CliError::Usage(e.to_string()).report(),
    };
    let output_path = cli.global.output.clone();
    match run(cli).and_then(|out| write_output(out, output_path.as_ref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

//! Quantum and classical clocks: Fisher timing information, the covariant
//! quasi-order of clocks, limits on copying timing information, and clock
//! synchronism.

pub mod channels;
pub mod clock;
pub mod cloning;
pub mod dykstra;
pub mod error;
pub mod fisher;
pub mod io;
pub mod linalg;
pub mod order;
pub mod random;
pub mod signal;
pub mod spectral;
pub mod sync;

pub use channels::{Channel, CovariantChoi, CovariantPovm, GradedKraus, KrausOp, ShiftLayout};
pub use clock::{coherent_state, ClassicalCircleClock, HamiltonianSpec, QuantumClock, ValidationReport};
pub use error::{Result, TempusError};
pub use fisher::{classical_fisher, quantum_fisher, Povm};

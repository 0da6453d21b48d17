//! Exact and asymptotic expected runtimes of the (1+1) evolutionary algorithm
//! on the plateau benchmarks Needle and BlockLeadingOnes, with Markov-chain and
//! Monte Carlo oracles to check them against.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod group_walk;
pub mod numeric;
pub mod oracle;
pub mod runtime_formulas;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
pub use group_walk::{BitString, MutationRate};
pub use runtime_formulas::{MutationSchedule, ProblemKind, ProblemSpec, RuntimeEstimate};

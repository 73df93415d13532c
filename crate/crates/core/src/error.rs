use alloc::string::String;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("expected {expected} agent decisions, got {got}")]
    AgentCount { expected: usize, got: usize },

    #[error("expected {expected} aggregate blocks, got {got}")]
    BlockCount { expected: usize, got: usize },

    #[error("agent {agent}: trajectory has {states} states and {controls} controls, expected {expected} of each")]
    TrajectoryLength {
        agent: usize,
        states: usize,
        controls: usize,
        expected: usize,
    },

    #[error("agent {agent}: infeasible trajectory at t={time}: {reason}")]
    Infeasible {
        agent: usize,
        time: usize,
        reason: &'static str,
    },

    #[error("agent {agent}: no feasible control at t={time} in state {state}")]
    EmptyControlSet {
        agent: usize,
        time: usize,
        state: usize,
    },

    #[error("agent {agent}: empty initial state set")]
    EmptyInitialSet { agent: usize },

    #[error("invalid instance ({} violation(s))", .0.len())]
    Invalid(ValidationReport),

    #[error("iteration count must be at least 1")]
    ZeroIterations,

    #[error("enumeration requires {size} combinations, above the cap of {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("constraint family ({family}) violated: {detail}")]
    ConstraintViolation { family: &'static str, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

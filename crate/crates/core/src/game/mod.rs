//! Coalition structures, unilateral moves and the asynchronous sweep.

mod engine;
mod stability;
mod structure;

pub use engine::{
    accept, accept_with, decision_seed, run_events, solve, solve_observed, sweep_order, AcceptRule, DecisionRecord,
    DecisionSource, EngineConfig, EventOutcome, Observation, Rollout, SolveOutcome, TabuList, Termination,
};
pub use stability::{best_response, is_nash_stable, Deviation, StabilityReport};
pub use structure::{
    CoalitionStructure, Move, RouteNodeReport, RouteReport, StructureReport, TaskAllocationReport,
};

use thiserror::Error;

use crate::cost::CostError;

/// Slack on the strict-improvement test.
pub const EPS_STRICT: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("logic error: {0}")]
    Logic(String),
    #[error(transparent)]
    Cost(#[from] CostError),
}

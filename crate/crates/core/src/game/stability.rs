use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

use super::{CoalitionStructure, Move, EPS_STRICT};

/// A unilateral move that strictly lowers the global cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub mv: Move,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// First improving deviation found, in agent then move order.
    pub witness: Option<Deviation>,
    /// Number of improving deviations over all agents.
    pub improving: usize,
}

/// Exhaustive check that no agent has an ADD, REMOVE or depot move that
/// lowers `J` by more than the strictness slack.
pub fn is_nash_stable(structure: &CoalitionStructure, scenario: &Scenario) -> StabilityReport {
    let j = structure.cost();
    let mut witness = None;
    let mut improving = 0;
    for agent in 0..scenario.agents.len() {
        for mv in structure.moves_of(scenario, agent) {
            let Some(cand) = structure.propose(scenario, mv) else { continue };
            let delta = cand.cost() - j;
            if delta < -EPS_STRICT {
                improving += 1;
                witness.get_or_insert(Deviation { mv, delta });
            }
        }
    }
    StabilityReport { stable: improving == 0, witness, improving }
}

/// The most improving move of `agent`, with its resulting structure.
pub fn best_response(
    structure: &CoalitionStructure,
    scenario: &Scenario,
    agent: usize,
) -> Option<(Deviation, CoalitionStructure)> {
    let j = structure.cost();
    let mut best: Option<(Deviation, CoalitionStructure)> = None;
    for mv in structure.moves_of(scenario, agent) {
        let Some(cand) = structure.propose(scenario, mv) else { continue };
        let delta = cand.cost() - j;
        if delta < -EPS_STRICT && best.as_ref().is_none_or(|b| delta < b.0.delta) {
            best = Some((Deviation { mv, delta }, cand));
        }
    }
    best
}

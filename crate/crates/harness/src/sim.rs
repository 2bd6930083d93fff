use std::collections::BTreeMap;

use ocf_core::cost::CostBreakdown;
use ocf_core::game::{run_events, CoalitionStructure, DecisionRecord, EngineConfig, EventOutcome, Observation};
use ocf_core::policy::Policy;
use ocf_core::scenario::Scenario;
use serde::{Deserialize, Serialize};

/// Tasks one agent of the fleet could carry alone versus tasks that need a
/// coalition by capacity alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandClass {
    Light,
    Heavy,
}

impl DemandClass {
    pub fn of(scenario: &Scenario, task: usize) -> Self {
        if scenario.tasks[task].demand_kg > scenario.max_capacity() {
            DemandClass::Heavy
        } else {
            DemandClass::Light
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DemandClass::Light => "light",
            DemandClass::Heavy => "heavy",
        }
    }
}

/// Final coalition sizes keyed by (demand class, size).
pub type CoalitionHistogram = BTreeMap<(DemandClass, usize), usize>;

#[derive(Debug, Clone)]
pub struct Timeline {
    pub events: Vec<EventOutcome>,
    pub traces: Vec<Vec<DecisionRecord>>,
    pub structure: CoalitionStructure,
    /// Breakdown of the final structure with every task released.
    pub breakdown: CostBreakdown,
    pub histogram: CoalitionHistogram,
}

impl Timeline {
    pub fn final_cost(&self) -> f64 {
        self.breakdown.total
    }

    pub fn accepted(&self) -> usize {
        self.events.iter().map(|e| e.accepted).sum()
    }

    pub fn decisions(&self) -> usize {
        self.events.iter().map(|e| e.decisions).sum()
    }
}

pub fn coalition_histogram(scenario: &Scenario, structure: &CoalitionStructure) -> CoalitionHistogram {
    let mut h = CoalitionHistogram::new();
    for (m, alloc) in structure.allocations().iter().enumerate() {
        *h.entry((DemandClass::of(scenario, m), alloc.coalition_size())).or_default() += 1;
    }
    h
}

/// Replays every arrival event with warm-started re-solves and evaluates the
/// final structure at the horizon.
pub fn simulate(scenario: &Scenario, policy: &Policy, cfg: &EngineConfig) -> Timeline {
    simulate_observed(scenario, policy, cfg, &mut |_| {})
}

pub fn simulate_observed(
    scenario: &Scenario,
    policy: &Policy,
    cfg: &EngineConfig,
    observer: &mut dyn FnMut(&Observation<'_>),
) -> Timeline {
    let rollout = run_events(scenario, policy, cfg, observer);
    let mut end = rollout.structure.clone();
    let horizon = scenario.horizon_s.max(end.t_now());
    end.advance(scenario, horizon);
    Timeline {
        breakdown: end.breakdown(scenario),
        histogram: coalition_histogram(scenario, &rollout.structure),
        events: rollout.events,
        traces: rollout.traces,
        structure: rollout.structure,
    }
}

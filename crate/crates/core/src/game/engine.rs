use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::policy::{self, Policy, StateView};
use crate::routing::NodeRef;
use crate::scenario::Scenario;

use super::stability::{is_nash_stable, StabilityReport};
use super::{CoalitionStructure, Move, EPS_STRICT};

/// Bounded FIFO of visited structure hashes.
#[derive(Debug, Clone)]
pub struct TabuList {
    capacity: usize,
    entries: VecDeque<u64>,
}

impl TabuList {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "tabu capacity must be at least 1");
        Self { capacity, entries: VecDeque::with_capacity(capacity) }
    }

    pub fn contains(&self, hash: u64) -> bool {
        self.entries.contains(&hash)
    }

    pub fn push(&mut self, hash: u64) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(hash);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Improvement test applied to candidates. `NonStrict` exists only to check
/// that the verification suite catches a weakened rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AcceptRule {
    #[default]
    Strict,
    NonStrict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Maximum number of sweeps `K_max`.
    pub max_sweeps: usize,
    /// Maximum consecutive non-improving decisions `C_max`; `None` means `3N`.
    pub max_idle: Option<usize>,
    pub tabu_capacity: usize,
    pub seed: u64,
    pub accept_rule: AcceptRule,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { max_sweeps: 100, max_idle: None, tabu_capacity: 50, seed: 0, accept_rule: AcceptRule::Strict }
    }
}

impl EngineConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn idle_limit(&self, agents: usize) -> usize {
        self.max_idle.unwrap_or(3 * agents).max(1)
    }
}

/// `true` iff `candidate` improves on `current` and is not tabu; on
/// acceptance the current structure's hash is recorded.
pub fn accept(candidate: &CoalitionStructure, current: &CoalitionStructure, tabu: &mut TabuList) -> bool {
    accept_with(candidate, current, tabu, AcceptRule::Strict)
}

pub fn accept_with(
    candidate: &CoalitionStructure,
    current: &CoalitionStructure,
    tabu: &mut TabuList,
    rule: AcceptRule,
) -> bool {
    let improves = match rule {
        AcceptRule::Strict => candidate.cost() < current.cost() - EPS_STRICT,
        AcceptRule::NonStrict => candidate.cost() <= current.cost(),
    };
    if !improves || tabu.contains(candidate.canonical_hash()) {
        return false;
    }
    tabu.push(current.canonical_hash());
    true
}

/// Uniformly random activation order for sweep `k`.
pub fn sweep_order(agents: usize, seed: u64, k: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let mut order: Vec<usize> = (0..agents).collect();
    order.shuffle(&mut rng);
    order
}

/// Per-decision seed for stochastic policies.
pub fn decision_seed(seed: u64, decision: u64) -> u64 {
    let mut z = seed ^ decision.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionSource {
    /// Candidate chosen by the policy.
    Policy,
    /// Best response found by the exhaustive check after `C_max` idle decisions.
    Stabilizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub k: usize,
    pub agent: usize,
    pub target: Option<NodeRef>,
    pub op: Option<Move>,
    /// `J(candidate) - J(current)`, if a candidate was formed.
    pub delta_j: Option<f64>,
    pub accepted: bool,
    pub c: usize,
    pub tabu_size: usize,
    /// `J` after the decision.
    pub cost: f64,
    pub source: DecisionSource,
}

/// What the observer sees for each decision.
pub struct Observation<'a> {
    pub record: &'a DecisionRecord,
    /// State and chosen candidate index, for policy decisions.
    pub view: Option<&'a StateView>,
    pub action: Option<usize>,
    pub before: &'a CoalitionStructure,
    pub after: &'a CoalitionStructure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// No improving unilateral deviation remains.
    Quiescent,
    /// The `K_max * N` decision budget ran out.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub structure: CoalitionStructure,
    pub trace: Vec<DecisionRecord>,
    pub termination: Termination,
    pub decisions: usize,
    pub accepted: usize,
    pub sweeps: usize,
    /// Stability check of the final structure when the budget ran out.
    pub stability: Option<StabilityReport>,
}

pub fn solve(
    scenario: &Scenario,
    t_now: f64,
    warm: CoalitionStructure,
    policy: &Policy,
    cfg: &EngineConfig,
) -> SolveOutcome {
    solve_observed(scenario, t_now, warm, policy, cfg, &mut |_| {})
}

/// Asynchronous sweep: agents decide one at a time against the freshest
/// structure. After more than `C_max` consecutive non-improving decisions the
/// engine switches to exhaustive best responses until none remains.
pub fn solve_observed(
    scenario: &Scenario,
    t_now: f64,
    warm: CoalitionStructure,
    policy: &Policy,
    cfg: &EngineConfig,
    observer: &mut dyn FnMut(&Observation<'_>),
) -> SolveOutcome {
    let n = scenario.agents.len();
    let budget = cfg.max_sweeps.max(1) * n;
    let c_max = cfg.idle_limit(n);
    let mut current = warm;
    if current.t_now() != t_now {
        current.advance(scenario, t_now);
    }
    let mut tabu = TabuList::new(cfg.tabu_capacity);
    let mut trace = Vec::new();
    let (mut c, mut decisions, mut accepted, mut k) = (0usize, 0usize, 0usize, 0usize);

    let termination = 'outer: loop {
        if decisions >= budget {
            break Termination::IterationLimit;
        }
        let order = sweep_order(n, cfg.seed, k as u64);
        k += 1;
        if c > c_max {
            // Stabilization pass: one best response per agent in sweep order.
            let mut moved = false;
            for &agent in &order {
                if decisions >= budget {
                    break 'outer Termination::IterationLimit;
                }
                let Some((mv, cand)) = allowed_best_response(&current, scenario, agent, &tabu, cfg.accept_rule) else {
                    continue;
                };
                let delta = cand.cost() - current.cost();
                let ok = accept_with(&cand, &current, &mut tabu, cfg.accept_rule);
                debug_assert!(ok);
                decisions += 1;
                accepted += 1;
                moved = true;
                let record = DecisionRecord {
                    k: k - 1,
                    agent,
                    target: Some(mv.target()),
                    op: Some(mv),
                    delta_j: Some(delta),
                    accepted: true,
                    c,
                    tabu_size: tabu.len(),
                    cost: cand.cost(),
                    source: DecisionSource::Stabilizer,
                };
                observer(&Observation { record: &record, view: None, action: None, before: &current, after: &cand });
                current = cand;
                trace.push(record);
            }
            if !moved {
                break Termination::Quiescent;
            }
            continue;
        }
        for &agent in &order {
            if decisions >= budget {
                break 'outer Termination::IterationLimit;
            }
            if c > c_max {
                continue 'outer;
            }
            let view = policy::build_state(scenario, &current, agent);
            let action = policy.select(&view, scenario, decision_seed(cfg.seed, decisions as u64));
            let target = action.map(|i| view.candidates[i].target);
            let mv = target.and_then(|t| current.move_for(agent, t));
            let cand = mv.and_then(|mv| current.propose(scenario, mv));
            let delta = cand.as_ref().map(|x| x.cost() - current.cost());
            let ok = cand.as_ref().is_some_and(|x| accept_with(x, &current, &mut tabu, cfg.accept_rule));
            decisions += 1;
            if ok {
                accepted += 1;
                c = 0;
            } else {
                c += 1;
            }
            let after = if ok { cand.expect("accepted candidate exists") } else { current.clone() };
            let record = DecisionRecord {
                k: k - 1,
                agent,
                target,
                op: mv,
                delta_j: delta,
                accepted: ok,
                c,
                tabu_size: tabu.len(),
                cost: after.cost(),
                source: DecisionSource::Policy,
            };
            observer(&Observation { record: &record, view: Some(&view), action, before: &current, after: &after });
            current = after;
            trace.push(record);
        }
    };

    let stability = match termination {
        Termination::Quiescent => None,
        Termination::IterationLimit => Some(is_nash_stable(&current, scenario)),
    };
    SolveOutcome { structure: current, trace, termination, decisions, accepted, sweeps: k, stability }
}

fn allowed_best_response(
    structure: &CoalitionStructure,
    scenario: &Scenario,
    agent: usize,
    tabu: &TabuList,
    rule: AcceptRule,
) -> Option<(Move, CoalitionStructure)> {
    let j = structure.cost();
    let mut best: Option<(f64, Move, CoalitionStructure)> = None;
    for mv in structure.moves_of(scenario, agent) {
        let Some(cand) = structure.propose(scenario, mv) else { continue };
        let delta = cand.cost() - j;
        let improves = match rule {
            AcceptRule::Strict => delta < -EPS_STRICT,
            AcceptRule::NonStrict => delta <= 0.0,
        };
        if improves && best.as_ref().is_none_or(|b| delta < b.0) && !tabu.contains(cand.canonical_hash()) {
            best = Some((delta, mv, cand));
        }
    }
    best.map(|(_, mv, cand)| (mv, cand))
}

/// Outcome of the solve triggered at one arrival event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub time: f64,
    /// `J` right after the new tasks are injected.
    pub cost_before: f64,
    pub cost_after: f64,
    pub decisions: usize,
    pub accepted: usize,
    pub sweeps: usize,
    pub termination: Termination,
    pub wall_s: f64,
    /// Improving deviations left when the budget ran out.
    pub improving_left: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub events: Vec<EventOutcome>,
    pub traces: Vec<Vec<DecisionRecord>>,
    pub structure: CoalitionStructure,
}

/// Replays the scenario's arrival events: at every distinct release time the
/// executed prefixes are frozen, new tasks become available and the game is
/// re-solved from the previous structure.
pub fn run_events(
    scenario: &Scenario,
    policy: &Policy,
    cfg: &EngineConfig,
    observer: &mut dyn FnMut(&Observation<'_>),
) -> Rollout {
    let mut structure = CoalitionStructure::empty(scenario, 0.0);
    let mut events = Vec::new();
    let mut traces = Vec::new();
    for (e, t) in scenario.event_times().into_iter().enumerate() {
        structure.advance(scenario, t);
        let cost_before = structure.cost();
        let event_cfg = EngineConfig { seed: decision_seed(cfg.seed, u64::MAX - e as u64), ..cfg.clone() };
        let started = std::time::Instant::now();
        let out = solve_observed(scenario, t, structure, policy, &event_cfg, observer);
        let wall_s = started.elapsed().as_secs_f64();
        events.push(EventOutcome {
            time: t,
            cost_before,
            cost_after: out.structure.cost(),
            decisions: out.decisions,
            accepted: out.accepted,
            sweeps: out.sweeps,
            termination: out.termination,
            wall_s,
            improving_left: out.stability.map(|s| s.improving),
        });
        traces.push(out.trace);
        structure = out.structure;
    }
    Rollout { events, traces, structure }
}

//! Observation construction, validity masking and task selectors.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::CoalitionStructure;
use crate::routing::{leg_length, NodeRef};
use crate::scenario::{Scenario, TaskKind};
use crate::tsac::{self, PolicyNetwork};

pub const AGENT_FEATURES: usize = 8;
pub const CANDIDATE_FEATURES: usize = 8;

/// Raw (unnormalized) quantities behind a candidate's features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateInfo {
    pub demand: u32,
    /// Residual demand excluding the deciding agent.
    pub residual: u32,
    /// Payload the deciding agent already holds on the task.
    pub own: u32,
    pub travel_time: f64,
    pub earliest_arrival: f64,
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub target: NodeRef,
    pub features: [f64; CANDIDATE_FEATURES],
    /// `0` or `-inf`.
    pub mask: f64,
    pub info: CandidateInfo,
}

impl Candidate {
    pub fn is_valid(&self) -> bool {
        self.mask == 0.0
    }
}

/// What one agent sees when it is activated: its own state plus one entry
/// per available task and per depot (tasks first, in id order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub agent: usize,
    pub t_now: f64,
    pub agent_features: [f64; AGENT_FEATURES],
    pub candidates: Vec<Candidate>,
}

impl StateView {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn mask(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.mask).collect()
    }

    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.candidates.iter().enumerate().filter(|(_, c)| c.is_valid()).map(|(i, _)| i)
    }

    /// Same state with candidates reordered so that entry `i` is the old
    /// entry `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { candidates: perm.iter().map(|&i| self.candidates[i].clone()).collect(), ..self.clone() }
    }
}

/// Normalization constants taken from the scenario.
#[derive(Debug, Clone, Copy)]
struct Scales {
    side: f64,
    horizon: f64,
    mass: f64,
    speed: f64,
    range: f64,
}

impl Scales {
    fn of(scenario: &Scenario) -> Self {
        let max_demand = scenario.tasks.iter().map(|t| t.demand_kg).max().unwrap_or(1);
        Self {
            side: scenario.area_side_m,
            horizon: scenario.horizon_s,
            mass: scenario.max_capacity().max(max_demand) as f64,
            speed: scenario.max_speed(),
            range: scenario.max_range(),
        }
    }

    fn coord(&self, v: f64) -> f64 {
        (v / self.side).clamp(-1.0, 1.0)
    }

    fn time(&self, v: f64) -> f64 {
        (v / self.horizon).clamp(-1.0, 1.0)
    }
}

pub fn build_state(scenario: &Scenario, structure: &CoalitionStructure, agent: usize) -> StateView {
    let sc = Scales::of(scenario);
    let t_now = structure.t_now();
    let a = &scenario.agents[agent];
    let route = structure.route(agent);
    let trace = structure.trace(agent);
    let here = &trace.nodes[route.frozen.max(1) - 1];
    let remaining = (a.max_range_m - here.distance).max(0.0);
    let agent_features = [
        sc.coord(here.position.x),
        sc.coord(here.position.y),
        a.speed_mps / sc.speed,
        a.capacity_kg as f64 / sc.mass,
        (here.delivery_load.max(0) as f64 / sc.mass).min(1.0),
        (here.pickup_load.max(0) as f64 / sc.mass).min(1.0),
        remaining / sc.range,
        sc.time(t_now),
    ];

    let mut candidates = Vec::new();
    for m in scenario.available_tasks(t_now) {
        let task = &scenario.tasks[m];
        let residual = structure.residual_demand(scenario, m, Some(agent));
        let own = structure.allocations()[m].payload(agent);
        let travel_time = leg_length(here.position, task.position) / a.speed_mps;
        let earliest_arrival = task.start().max(here.arrival + travel_time);
        let mask = match route.position_of(m) {
            Some(k) if k >= route.frozen => 0.0,
            Some(_) => f64::NEG_INFINITY,
            None if structure.can_add(scenario, agent, m) => 0.0,
            None => f64::NEG_INFINITY,
        };
        let features = [
            sc.coord(task.position.x),
            sc.coord(task.position.y),
            residual as f64 / sc.mass,
            sc.time(task.start()),
            sc.time(task.end()),
            if task.kind == TaskKind::Pickup { 1.0 } else { -1.0 },
            sc.time(task.end() - t_now),
            own as f64 / sc.mass,
        ];
        let info = CandidateInfo { demand: task.demand_kg, residual, own, travel_time, earliest_arrival, deadline: task.end() };
        candidates.push(Candidate { target: NodeRef::Task(m), features, mask, info });
    }
    for (d, depot) in scenario.depots.iter().enumerate() {
        let dist = leg_length(here.position, depot.position);
        let mut features = [0.0; CANDIDATE_FEATURES];
        features[0] = sc.coord(depot.position.x);
        features[1] = sc.coord(depot.position.y);
        let travel_time = dist / a.speed_mps;
        let info = CandidateInfo {
            demand: 0,
            residual: 0,
            own: 0,
            travel_time,
            earliest_arrival: here.arrival + travel_time,
            deadline: f64::INFINITY,
        };
        let mask = if dist <= remaining { 0.0 } else { f64::NEG_INFINITY };
        candidates.push(Candidate { target: NodeRef::Depot(d), features, mask, info });
    }
    StateView { agent, t_now, agent_features, candidates }
}

/// The additive mask of [`build_state`] on its own.
pub fn validity_mask(scenario: &Scenario, structure: &CoalitionStructure, agent: usize) -> Vec<f64> {
    build_state(scenario, structure, agent).mask()
}

/// Uniform choice among unmasked candidates; `None` if all are masked.
pub fn random_select(view: &StateView, seed: u64) -> Option<usize> {
    let valid: Vec<usize> = view.valid_indices().collect();
    if valid.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Some(valid[rng.gen_range(0..valid.len())])
}

/// Residual-targeting, urgency- and proximity-weighted score of a task.
/// Tasks the agent already serves score 0.
pub fn heuristic_score(info: &CandidateInfo, horizon: f64) -> f64 {
    let open = if info.own > 0 { 0.0 } else { info.residual as f64 };
    let slack = ((info.deadline - info.earliest_arrival) / horizon).clamp(0.0, 1.0);
    (open / info.demand as f64) * (1.0 - slack) / (1.0 + info.travel_time / horizon)
}

pub fn heuristic_select(view: &StateView, horizon: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, c) in view.candidates.iter().enumerate() {
        if !c.is_valid() || c.target.is_depot() {
            continue;
        }
        let s = heuristic_score(&c.info, horizon);
        // Candidates are in task id order, so a strict comparison keeps the lower id on ties.
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, i));
        }
    }
    if let Some((_, i)) = best {
        return Some(i);
    }
    view.candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_valid() && c.target.is_depot())
        .min_by(|a, b| a.1.info.travel_time.total_cmp(&b.1.info.travel_time))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectMode {
    Sample,
    Argmax,
}

/// Masked action distribution of the network for `view`.
pub fn learned_distribution(view: &StateView, net: &PolicyNetwork) -> Vec<f64> {
    let out = net.forward(view);
    tsac::masked_softmax(&out.logits, &view.mask())
}

pub fn learned_select(view: &StateView, net: &PolicyNetwork, mode: SelectMode, seed: u64) -> Option<usize> {
    if view.valid_indices().next().is_none() {
        return None;
    }
    let probs = learned_distribution(view, net);
    match mode {
        SelectMode::Argmax => probs
            .iter()
            .enumerate()
            .filter(|(i, _)| view.candidates[*i].is_valid())
            .fold(None, |best: Option<(usize, f64)>, (i, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((i, p)),
            })
            .map(|(i, _)| i),
        SelectMode::Sample => Some(sample_index(&probs, seed)),
    }
}

/// Inverse-CDF draw from a distribution whose zero entries are never chosen.
pub fn sample_index(probs: &[f64], seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[derive(Debug, Clone)]
pub enum Policy {
    Random,
    Heuristic,
    Learned { net: Arc<PolicyNetwork>, mode: SelectMode },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::Heuristic => "heuristic",
            Policy::Learned { .. } => "tsac",
        }
    }

    /// Index of the chosen candidate, or `None` when every candidate is masked.
    pub fn select(&self, view: &StateView, scenario: &Scenario, seed: u64) -> Option<usize> {
        match self {
            Policy::Random => random_select(view, seed),
            Policy::Heuristic => heuristic_select(view, scenario.horizon_s),
            Policy::Learned { net, mode } => learned_select(view, net, *mode, seed),
        }
    }
}

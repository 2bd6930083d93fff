//! Generalized logistics cost: payload deficiency, service timeliness and
//! operational cost per task, the global cost `J`, and its per-agent
//! decomposition into the potential `Phi`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::{NodeRef, Route, RouteTrace};
use crate::scenario::{Scenario, Task};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("task {task} allocates {payload} kg to agent {agent}, whose route does not visit it")]
    Inconsistent { task: usize, agent: usize, payload: u32 },
    #[error("agent {agent} visits task {task} without an allocation")]
    Unallocated { task: usize, agent: usize },
    #[error(transparent)]
    Routing(#[from] crate::routing::RoutingError),
}

/// Payload allocation vector of one task: agent index -> kg (absent = 0).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation(pub BTreeMap<usize, u32>);

impl Allocation {
    pub fn payload(&self, agent: usize) -> u32 {
        self.0.get(&agent).copied().unwrap_or(0)
    }

    pub fn set(&mut self, agent: usize, payload: u32) {
        if payload == 0 {
            self.0.remove(&agent);
        } else {
            self.0.insert(agent, payload);
        }
    }

    /// Members with a positive allocation, in agent order.
    pub fn coalition(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().filter(|(_, &a)| a > 0).map(|(&n, _)| n)
    }

    pub fn coalition_size(&self) -> usize {
        self.coalition().count()
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&a| a as u64).sum()
    }
}

/// One coalition member as seen by the task: payload and arrival time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Member {
    pub agent: usize,
    pub payload: u32,
    pub arrival: f64,
}

/// `max{0, 1 - sum of on-time payload / R_m}`; 1 for an empty coalition.
pub fn load_cost(task: &Task, members: &[Member]) -> f64 {
    let valid: u64 = members
        .iter()
        .filter(|m| m.payload > 0 && m.arrival <= task.end())
        .map(|m| m.payload as u64)
        .sum();
    (1.0 - valid as f64 / task.demand_kg as f64).max(0.0)
}

/// Elapsed service time until the last member arrives, over the horizon;
/// 1 if the last member is late or the coalition is empty.
pub fn time_cost(task: &Task, members: &[Member], horizon: f64) -> f64 {
    let last = members
        .iter()
        .filter(|m| m.payload > 0)
        .map(|m| m.arrival)
        .fold(f64::NEG_INFINITY, f64::max);
    if last.is_finite() && last <= task.end() {
        ((last - task.start()) / horizon).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Operational cost charged on the leg into each node (entry 0 is always 0).
///
/// Legs cost `alpha * L / E_base` while the cumulative distance stays within
/// range; the leg that crosses the range limit takes the remainder up to the
/// saturated total `(alpha * D_max + lambda) / E_base` and later legs are
/// free. Routes without task nodes do not fly and cost nothing.
pub fn leg_costs(route: &Route, trace: &RouteTrace, scenario: &Scenario, e_base: f64) -> Vec<f64> {
    let mut costs = vec![0.0; route.nodes.len()];
    if !route.has_tasks() {
        return costs;
    }
    let agent = &scenario.agents[route.agent];
    let saturated = agent.economic_loss() / e_base;
    let mut spent = 0.0;
    let mut over = false;
    for k in 1..route.nodes.len() {
        if over {
            break;
        }
        let leg = trace.nodes[k].distance - trace.nodes[k - 1].distance;
        if trace.nodes[k].distance <= agent.max_range_m {
            costs[k] = agent.energy_rate * leg / e_base;
            spent += costs[k];
        } else {
            costs[k] = saturated - spent;
            over = true;
        }
    }
    costs
}

pub fn route_op_cost(route: &Route, trace: &RouteTrace, scenario: &Scenario, e_base: f64) -> f64 {
    leg_costs(route, trace, scenario, e_base).iter().sum()
}

/// Attributes every leg cost of a route to a task node: a task's own inbound
/// leg, plus depot legs that follow it; depot legs before the first task go
/// to the first task. Returns `(task, q_n(m), arrival)` per task node.
pub fn attribute_op(route: &Route, trace: &RouteTrace, scenario: &Scenario, e_base: f64) -> Vec<(usize, f64, f64)> {
    let legs = leg_costs(route, trace, scenario, e_base);
    let mut out: Vec<(usize, f64, f64)> = Vec::new();
    let mut pending = 0.0;
    for (k, node) in route.nodes.iter().enumerate() {
        match node.node {
            NodeRef::Task(m) => {
                out.push((m, legs[k] + pending, trace.nodes[k].arrival));
                pending = 0.0;
            }
            NodeRef::Depot(_) => match out.last_mut() {
                Some(last) => last.1 += legs[k],
                None => pending += legs[k],
            },
        }
    }
    out
}

/// Per-task cost terms. All terms are dimensionless; `total` is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskCost {
    pub load: f64,
    pub time: f64,
    pub op: f64,
    pub total: f64,
}

impl TaskCost {
    pub fn unserved(scenario: &Scenario) -> Self {
        let w = scenario.weights;
        Self { load: 1.0, time: 1.0, op: 0.0, total: w.load + w.time }
    }
}

/// Members carry their share of the op cost in `op_share`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberCost {
    pub member: Member,
    pub op_share: f64,
}

pub fn task_cost(task: &Task, members: &[MemberCost], scenario: &Scenario) -> TaskCost {
    if members.is_empty() {
        return TaskCost::unserved(scenario);
    }
    let plain: Vec<Member> = members.iter().map(|m| m.member).collect();
    let load = load_cost(task, &plain);
    let time = time_cost(task, &plain, scenario.horizon_s);
    let op: f64 = members.iter().map(|m| m.op_share).sum();
    let w = scenario.weights;
    TaskCost { load, time, op, total: w.load * load + w.time * time + w.op * op }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Per task; `None` for tasks not yet released.
    pub tasks: Vec<Option<TaskCost>>,
    /// `J`: sum of released task costs.
    pub total: f64,
    /// `Phi`: sum of agent shares plus the unserved bucket.
    pub potential: f64,
    /// `c_n` per agent.
    pub agent_shares: Vec<f64>,
    /// Weighted cost of released tasks with an empty coalition.
    pub unserved: f64,
}

/// Full recomputation of the cost of a structure given as allocations and
/// routes at time `t_now`. Traces are recomputed from scratch.
pub fn evaluate(
    scenario: &Scenario,
    allocations: &[Allocation],
    routes: &[Route],
    t_now: f64,
) -> Result<CostBreakdown, CostError> {
    let e_base = scenario.economic_base();
    let mut members: Vec<Vec<MemberCost>> = vec![Vec::new(); scenario.tasks.len()];
    let mut route_totals = vec![0.0; routes.len()];
    for (n, route) in routes.iter().enumerate() {
        let trace = crate::routing::trace_route(route, scenario)?;
        route_totals[n] = route_op_cost(route, &trace, scenario, e_base);
        for (m, q, arrival) in attribute_op(route, &trace, scenario, e_base) {
            let payload = allocations[m].payload(n);
            if payload == 0 {
                return Err(CostError::Unallocated { task: m, agent: n });
            }
            members[m].push(MemberCost { member: Member { agent: n, payload, arrival }, op_share: q });
        }
    }
    for (m, alloc) in allocations.iter().enumerate() {
        for n in alloc.coalition() {
            if !members[m].iter().any(|mc| mc.member.agent == n) {
                return Err(CostError::Inconsistent { task: m, agent: n, payload: alloc.payload(n) });
            }
        }
    }

    let w = scenario.weights;
    let mut tasks = vec![None; scenario.tasks.len()];
    let mut agent_shares: Vec<f64> = route_totals.iter().map(|c| w.op * c).collect();
    let mut unserved = 0.0;
    for (m, task) in scenario.tasks.iter().enumerate() {
        if !scenario.is_available(m, t_now) {
            continue;
        }
        let c = task_cost(task, &members[m], scenario);
        if members[m].is_empty() {
            unserved += c.total;
        } else {
            let service = (w.load * c.load + w.time * c.time) / members[m].len() as f64;
            for mc in &members[m] {
                agent_shares[mc.member.agent] += service;
            }
        }
        tasks[m] = Some(c);
    }
    let total = tasks.iter().flatten().map(|c| c.total).sum();
    let potential = agent_shares.iter().sum::<f64>() + unserved;
    Ok(CostBreakdown { tasks, total, potential, agent_shares, unserved })
}

//! Per-agent execution sequences: arrival times, payload traces, cumulative
//! distance, feasibility, and task insertion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost;
use crate::scenario::{Point, Scenario, TaskKind};

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("route of agent {agent} references unknown {what} index {index}")]
    UnknownNode { agent: usize, what: &'static str, index: usize },
    #[error("route of agent {agent} is malformed: {reason}")]
    Malformed { agent: usize, reason: String },
}

/// Straight-line path length between two points, in meters.
pub fn leg_length(p: Point, q: Point) -> f64 {
    (q.x - p.x).hypot(q.y - p.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeRef {
    Task(usize),
    Depot(usize),
}

impl NodeRef {
    pub fn is_depot(self) -> bool {
        matches!(self, NodeRef::Depot(_))
    }

    pub fn task(self) -> Option<usize> {
        match self {
            NodeRef::Task(m) => Some(m),
            NodeRef::Depot(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RouteNode {
    pub node: NodeRef,
    /// Planned payload action in kg; zero for depots.
    pub payload: u32,
}

impl RouteNode {
    pub fn depot(d: usize) -> Self {
        Self { node: NodeRef::Depot(d), payload: 0 }
    }

    pub fn task(m: usize, payload: u32) -> Self {
        Self { node: NodeRef::Task(m), payload }
    }
}

/// Execution sequence of one agent. Node 0 is the launch depot and is located
/// at the agent's start position; the last node is the closing depot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    pub agent: usize,
    pub nodes: Vec<RouteNode>,
    /// Number of leading nodes already executed; never modified by moves.
    pub frozen: usize,
}

impl Route {
    /// `<home, home>` with only the launch node executed.
    pub fn idle(scenario: &Scenario, agent: usize) -> Self {
        let home = scenario.home_depot(agent);
        Self { agent, nodes: vec![RouteNode::depot(home), RouteNode::depot(home)], frozen: 1 }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn position_of(&self, task: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.node == NodeRef::Task(task))
    }

    /// Index of `task` if it sits in the mutable suffix.
    pub fn mutable_position_of(&self, task: usize) -> Option<usize> {
        self.position_of(task).filter(|&k| k >= self.frozen)
    }

    pub fn has_tasks(&self) -> bool {
        self.nodes.iter().any(|n| !n.node.is_depot())
    }

    pub fn tasks(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| n.node.task())
    }

    fn check(&self, scenario: &Scenario) -> Result<(), RoutingError> {
        let malformed = |reason: &str| RoutingError::Malformed { agent: self.agent, reason: reason.into() };
        if self.agent >= scenario.agents.len() {
            return Err(RoutingError::UnknownNode { agent: self.agent, what: "agent", index: self.agent });
        }
        if self.nodes.len() < 2 {
            return Err(malformed("fewer than two nodes"));
        }
        if !self.nodes[0].node.is_depot() || !self.nodes[self.nodes.len() - 1].node.is_depot() {
            return Err(malformed("route must start and end at a depot"));
        }
        if self.frozen > self.nodes.len() {
            return Err(malformed("frozen prefix longer than route"));
        }
        for n in &self.nodes {
            match n.node {
                NodeRef::Task(m) if m >= scenario.tasks.len() => {
                    return Err(RoutingError::UnknownNode { agent: self.agent, what: "task", index: m })
                }
                NodeRef::Depot(d) if d >= scenario.depots.len() => {
                    return Err(RoutingError::UnknownNode { agent: self.agent, what: "depot", index: d })
                }
                NodeRef::Depot(_) if n.payload != 0 => return Err(malformed("depot with nonzero payload")),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Physical start of a trace: time and position of node 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Departure {
    pub time: f64,
    pub position: Point,
}

impl Departure {
    pub fn of_agent(scenario: &Scenario, agent: usize) -> Self {
        Self { time: 0.0, position: scenario.agents[agent].position }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTrace {
    pub arrival: f64,
    /// Delivery load after the node, kg.
    pub delivery_load: i64,
    /// Pickup load after the node, kg.
    pub pickup_load: i64,
    /// Distance flown up to and including the leg into this node, meters.
    pub distance: f64,
    pub position: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Delivery load went negative at this node.
    NegativeLoad(usize),
    /// Delivery plus pickup load exceeded capacity at this node.
    Capacity(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteTrace {
    pub nodes: Vec<NodeTrace>,
    pub violation: Option<Violation>,
}

impl RouteTrace {
    pub fn feasible(&self) -> bool {
        self.violation.is_none()
    }

    pub fn total_distance(&self) -> f64 {
        self.nodes.last().map_or(0.0, |n| n.distance)
    }
}

pub fn node_position(node: NodeRef, scenario: &Scenario) -> Point {
    match node {
        NodeRef::Task(m) => scenario.tasks[m].position,
        NodeRef::Depot(d) => scenario.depots[d].position,
    }
}

/// Trace from the agent's own start (t = 0 at its initial position).
pub fn trace_route(route: &Route, scenario: &Scenario) -> Result<RouteTrace, RoutingError> {
    trace_route_from(route, scenario, Departure::of_agent(scenario, route.agent))
}

pub fn trace_route_from(route: &Route, scenario: &Scenario, start: Departure) -> Result<RouteTrace, RoutingError> {
    route.check(scenario)?;
    Ok(trace_unchecked(route, scenario, start))
}

fn trace_unchecked(route: &Route, scenario: &Scenario, start: Departure) -> RouteTrace {
    let agent = &scenario.agents[route.agent];
    let capacity = agent.capacity_kg as i64;
    let mut nodes = Vec::with_capacity(route.nodes.len());
    let mut violation = None;
    let mut time = start.time;
    let mut position = start.position;
    let mut distance = 0.0;
    let mut delivery = 0i64;
    let mut pickup = 0i64;

    for (k, node) in route.nodes.iter().enumerate() {
        if k > 0 {
            let next = node_position(node.node, scenario);
            let leg = leg_length(position, next);
            distance += leg;
            let window_start = match node.node {
                NodeRef::Task(m) => scenario.tasks[m].start(),
                NodeRef::Depot(_) => 0.0,
            };
            time = window_start.max(time + leg / agent.speed_mps);
            position = next;
        }
        match node.node {
            NodeRef::Depot(_) => {
                let upcoming: i64 = route.nodes[k + 1..]
                    .iter()
                    .take_while(|n| !n.node.is_depot())
                    .filter(|n| matches!(n.node, NodeRef::Task(m) if scenario.tasks[m].kind == TaskKind::Delivery))
                    .map(|n| n.payload as i64)
                    .sum();
                pickup = 0;
                delivery = capacity.min(upcoming);
            }
            NodeRef::Task(m) => match scenario.tasks[m].kind {
                TaskKind::Delivery => delivery -= node.payload as i64,
                TaskKind::Pickup => pickup += node.payload as i64,
            },
        }
        if violation.is_none() {
            if delivery < 0 || pickup < 0 {
                violation = Some(Violation::NegativeLoad(k));
            } else if delivery + pickup > capacity {
                violation = Some(Violation::Capacity(k));
            }
        }
        nodes.push(NodeTrace { arrival: time, delivery_load: delivery, pickup_load: pickup, distance, position });
    }
    RouteTrace { nodes, violation }
}

/// Marks every node whose arrival time is at most `t` as executed.
pub fn freeze_until(route: &Route, trace: &RouteTrace, t: f64) -> Route {
    let done = trace.nodes.iter().take_while(|n| n.arrival <= t).count();
    Route { frozen: route.frozen.max(done).max(1), ..route.clone() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    pub route: Route,
    pub trace: RouteTrace,
    /// Index of the inserted task node in the new route.
    pub index: usize,
    /// Depot visit inserted immediately before the task, if any.
    pub depot: Option<usize>,
    /// Increase of the agent's operational cost (unweighted).
    pub op_increase: f64,
}

/// Insertion of task `task` with payload `payload` at the cheapest feasible
/// position after the frozen prefix. Depot-assisted insertions are only tried
/// when no plain position is feasible.
pub fn cheapest_insertion(route: &Route, task: usize, payload: u32, scenario: &Scenario) -> Option<Insertion> {
    debug_assert!(payload >= 1);
    debug_assert!(route.mutable_position_of(task).is_none());
    let e_base = scenario.economic_base();
    let start = Departure::of_agent(scenario, route.agent);
    let base_trace = trace_unchecked(route, scenario, start);
    let base_cost = cost::route_op_cost(route, &base_trace, scenario, e_base);

    let plain = candidate_routes(route, task, payload, None);
    if let Some(best) = best_of(plain, route, task, scenario, start, base_cost, e_base) {
        return Some(best);
    }
    let with_depot = (0..scenario.depots.len()).flat_map(|d| candidate_routes(route, task, payload, Some(d)));
    best_of(with_depot, route, task, scenario, start, base_cost, e_base)
}

/// All insertions of `task` (optionally preceded by a depot visit) into the
/// mutable part of `route`, as (route, task index, depot) in position order.
fn candidate_routes(
    route: &Route,
    task: usize,
    payload: u32,
    depot: Option<usize>,
) -> impl Iterator<Item = (Route, usize, Option<usize>)> + '_ {
    let len = route.nodes.len();
    let lo = route.frozen.max(1);
    let reopen = route.frozen >= len;
    let positions = if reopen { len..len + 1 } else { lo..len };
    positions.map(move |p| {
        let mut nodes = Vec::with_capacity(len + 3);
        nodes.extend_from_slice(&route.nodes[..p]);
        if let Some(d) = depot {
            nodes.push(RouteNode::depot(d));
        }
        let index = nodes.len();
        nodes.push(RouteNode::task(task, payload));
        if reopen {
            // The agent already closed its loop; it departs again and returns
            // to the same depot.
            nodes.push(route.nodes[len - 1]);
        } else {
            nodes.extend_from_slice(&route.nodes[p..]);
        }
        (Route { agent: route.agent, nodes, frozen: route.frozen }, index, depot)
    })
}

fn best_of(
    candidates: impl Iterator<Item = (Route, usize, Option<usize>)>,
    original: &Route,
    task: usize,
    scenario: &Scenario,
    start: Departure,
    base_cost: f64,
    e_base: f64,
) -> Option<Insertion> {
    let agent = &scenario.agents[original.agent];
    let deadline = scenario.tasks[task].end();
    let mut best: Option<Insertion> = None;
    for (route, index, depot) in candidates {
        let trace = trace_unchecked(&route, scenario, start);
        if !trace.feasible()
            || trace.nodes[index].arrival > deadline
            || trace.total_distance() > agent.max_range_m
        {
            continue;
        }
        let op_increase = cost::route_op_cost(&route, &trace, scenario, e_base) - base_cost;
        if best.as_ref().is_none_or(|b| op_increase < b.op_increase) {
            best = Some(Insertion { route, trace, index, depot, op_increase });
        }
    }
    best
}

/// Largest payload in `1..=cap` for which an insertion exists, with that
/// insertion. Feasibility is monotone in the payload, so a binary search
/// suffices.
pub fn max_feasible_insertion(route: &Route, task: usize, cap: u32, scenario: &Scenario) -> Option<(u32, Insertion)> {
    if cap == 0 {
        return None;
    }
    let mut best = cheapest_insertion(route, task, 1, scenario).map(|ins| (1, ins))?;
    if let Some(ins) = cheapest_insertion(route, task, cap, scenario) {
        return Some((cap, ins));
    }
    let (mut lo, mut hi) = (1u32, cap); // lo feasible, hi infeasible
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match cheapest_insertion(route, task, mid, scenario) {
            Some(ins) => {
                lo = mid;
                best = (mid, ins);
            }
            None => hi = mid,
        }
    }
    Some(best)
}

/// Removes intermediate mutable depot visits that are no longer needed for
/// feasibility, and a trailing re-opened closing depot.
pub fn drop_redundant_depots(route: &mut Route, scenario: &Scenario) {
    let start = Departure::of_agent(scenario, route.agent);
    let len = route.nodes.len();
    if len > 2 && route.frozen < len && route.frozen >= len - 1 && route.nodes[len - 2].node.is_depot() {
        route.nodes.pop();
    }
    loop {
        let last = route.nodes.len() - 1;
        let removable = (route.frozen.max(1)..last).find(|&k| {
            if !route.nodes[k].node.is_depot() {
                return false;
            }
            let mut probe = route.clone();
            probe.nodes.remove(k);
            trace_unchecked(&probe, scenario, start).feasible()
        });
        match removable {
            Some(k) => {
                route.nodes.remove(k);
            }
            None => break,
        }
    }
}

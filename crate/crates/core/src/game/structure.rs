use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::cost::{self, Allocation, CostBreakdown, MemberCost, Member, TaskCost};
use crate::routing::{self, NodeRef, Route, RouteTrace};
use crate::scenario::Scenario;

use super::GameError;

/// A unilateral coalition update of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Add { agent: usize, task: usize },
    Remove { agent: usize, task: usize },
    InsertDepot { agent: usize, depot: usize },
    RemoveDepot { agent: usize, depot: usize },
}

impl Move {
    pub fn agent(&self) -> usize {
        match *self {
            Move::Add { agent, .. }
            | Move::Remove { agent, .. }
            | Move::InsertDepot { agent, .. }
            | Move::RemoveDepot { agent, .. } => agent,
        }
    }

    pub fn target(&self) -> NodeRef {
        match *self {
            Move::Add { task, .. } | Move::Remove { task, .. } => NodeRef::Task(task),
            Move::InsertDepot { depot, .. } | Move::RemoveDepot { depot, .. } => NodeRef::Depot(depot),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Move::Add { .. } => "ADD",
            Move::Remove { .. } => "REMOVE",
            Move::InsertDepot { .. } => "DEPOT_ADD",
            Move::RemoveDepot { .. } => "DEPOT_REMOVE",
        }
    }
}

/// Payload allocations per task plus the induced execution sequences, with
/// cached traces and per-task costs kept consistent on every update.
#[derive(Debug, Clone)]
pub struct CoalitionStructure {
    allocations: Vec<Allocation>,
    routes: Vec<Route>,
    t_now: f64,
    traces: Vec<RouteTrace>,
    /// Per agent: (task, attributed op cost, arrival) for every task node.
    attributions: Vec<Vec<(usize, f64, f64)>>,
    route_costs: Vec<f64>,
    task_costs: Vec<Option<TaskCost>>,
    total: f64,
}

impl CoalitionStructure {
    /// Cold start: every agent idle at its launch point.
    pub fn empty(scenario: &Scenario, t_now: f64) -> Self {
        let routes = (0..scenario.agents.len()).map(|n| Route::idle(scenario, n)).collect();
        let allocations = vec![Allocation::default(); scenario.tasks.len()];
        let mut s = Self::from_parts(scenario, allocations, routes, 0.0).expect("idle structure is consistent");
        s.advance(scenario, t_now);
        s
    }

    pub fn from_parts(
        scenario: &Scenario,
        allocations: Vec<Allocation>,
        routes: Vec<Route>,
        t_now: f64,
    ) -> Result<Self, GameError> {
        if allocations.len() != scenario.tasks.len() || routes.len() != scenario.agents.len() {
            return Err(GameError::Logic("structure dimensions do not match the scenario".into()));
        }
        // Full validation through the independent evaluator.
        cost::evaluate(scenario, &allocations, &routes, t_now)?;
        let traces = routes
            .iter()
            .map(|r| routing::trace_route(r, scenario))
            .collect::<Result<Vec<_>, _>>()
            .map_err(cost::CostError::from)?;
        let mut s = Self {
            allocations,
            routes,
            t_now,
            traces,
            attributions: Vec::new(),
            route_costs: Vec::new(),
            task_costs: Vec::new(),
            total: 0.0,
        };
        s.recompute_all(scenario);
        Ok(s)
    }

    pub fn allocations(&self) -> &[Allocation] {
        &self.allocations
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn route(&self, agent: usize) -> &Route {
        &self.routes[agent]
    }

    pub fn trace(&self, agent: usize) -> &RouteTrace {
        &self.traces[agent]
    }

    pub fn t_now(&self) -> f64 {
        self.t_now
    }

    /// Global cost `J` over the tasks released by `t_now`.
    pub fn cost(&self) -> f64 {
        self.total
    }

    pub fn task_cost(&self, task: usize) -> Option<TaskCost> {
        self.task_costs[task]
    }

    pub fn task_costs(&self) -> &[Option<TaskCost>] {
        &self.task_costs
    }

    pub fn route_cost(&self, agent: usize) -> f64 {
        self.route_costs[agent]
    }

    /// Arrival time of `agent` at `task`, if the task is on its route.
    pub fn arrival(&self, agent: usize, task: usize) -> Option<f64> {
        self.attributions[agent].iter().find(|a| a.0 == task).map(|a| a.2)
    }

    /// Full independent recomputation of the cost breakdown.
    pub fn breakdown(&self, scenario: &Scenario) -> CostBreakdown {
        cost::evaluate(scenario, &self.allocations, &self.routes, self.t_now)
            .expect("structure invariants hold")
    }

    /// Order-independent fingerprint of allocations and routes.
    pub fn canonical_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (m, alloc) in self.allocations.iter().enumerate() {
            if alloc.0.is_empty() {
                continue;
            }
            m.hash(&mut h);
            alloc.hash(&mut h);
        }
        self.routes.hash(&mut h);
        h.finish()
    }

    /// Moves the clock to `t`, freezing every node reached by then.
    pub fn advance(&mut self, scenario: &Scenario, t: f64) {
        for (route, trace) in self.routes.iter_mut().zip(&self.traces) {
            *route = routing::freeze_until(route, trace, t);
        }
        self.t_now = t;
        self.recompute_all(scenario);
    }

    /// `max{0, R_m - on-time payload of every member other than `excluding`}`.
    pub fn residual_demand(&self, scenario: &Scenario, task: usize, excluding: Option<usize>) -> u32 {
        let t = &scenario.tasks[task];
        let covered: u64 = self.allocations[task]
            .0
            .iter()
            .filter(|(&n, _)| Some(n) != excluding)
            .filter(|(&n, _)| self.arrival(n, task).is_some_and(|a| a <= t.end()))
            .map(|(_, &a)| a as u64)
            .sum();
        (t.demand_kg as u64).saturating_sub(covered) as u32
    }

    fn recompute_all(&mut self, scenario: &Scenario) {
        let e_base = scenario.economic_base();
        self.attributions = self
            .routes
            .iter()
            .zip(&self.traces)
            .map(|(r, t)| cost::attribute_op(r, t, scenario, e_base))
            .collect();
        self.route_costs = self
            .routes
            .iter()
            .zip(&self.traces)
            .map(|(r, t)| cost::route_op_cost(r, t, scenario, e_base))
            .collect();
        self.task_costs = (0..scenario.tasks.len()).map(|m| self.compute_task_cost(scenario, m)).collect();
        self.resum();
    }

    fn compute_task_cost(&self, scenario: &Scenario, task: usize) -> Option<TaskCost> {
        if !scenario.is_available(task, self.t_now) {
            return None;
        }
        let members: Vec<MemberCost> = self.allocations[task]
            .coalition()
            .map(|n| {
                let (_, q, arrival) = *self.attributions[n]
                    .iter()
                    .find(|a| a.0 == task)
                    .expect("allocated task is on the member's route");
                MemberCost {
                    member: Member { agent: n, payload: self.allocations[task].payload(n), arrival },
                    op_share: q,
                }
            })
            .collect();
        Some(cost::task_cost(&scenario.tasks[task], &members, scenario))
    }

    fn resum(&mut self) {
        self.total = self.task_costs.iter().flatten().map(|c| c.total).sum();
    }

    /// Replaces one agent's route and payload entries, updating only the
    /// costs of tasks that agent touches before or after the change.
    pub(crate) fn with_agent_update(
        &self,
        scenario: &Scenario,
        agent: usize,
        route: Route,
        trace: RouteTrace,
        payloads: &[(usize, u32)],
    ) -> Self {
        let mut next = self.clone();
        let e_base = scenario.economic_base();
        let mut touched: Vec<usize> = self.attributions[agent].iter().map(|a| a.0).collect();
        next.attributions[agent] = cost::attribute_op(&route, &trace, scenario, e_base);
        next.route_costs[agent] = cost::route_op_cost(&route, &trace, scenario, e_base);
        touched.extend(next.attributions[agent].iter().map(|a| a.0));
        for &(task, payload) in payloads {
            next.allocations[task].set(agent, payload);
            touched.push(task);
        }
        next.routes[agent] = route;
        next.traces[agent] = trace;
        touched.sort_unstable();
        touched.dedup();
        for m in touched {
            next.task_costs[m] = next.compute_task_cost(scenario, m);
        }
        next.resum();
        next
    }

    /// Largest payload and insertion for `agent` joining `task`, if any.
    pub fn plan_add(&self, scenario: &Scenario, agent: usize, task: usize) -> Option<(u32, routing::Insertion)> {
        if !scenario.is_available(task, self.t_now) || self.routes[agent].position_of(task).is_some() {
            return None;
        }
        let residual = self.residual_demand(scenario, task, Some(agent));
        let cap = residual.min(scenario.agents[agent].capacity_kg);
        routing::max_feasible_insertion(&self.routes[agent], task, cap, scenario)
    }

    /// Whether an ADD of `task` by `agent` commits any payload.
    pub fn can_add(&self, scenario: &Scenario, agent: usize, task: usize) -> bool {
        if !scenario.is_available(task, self.t_now) || self.routes[agent].position_of(task).is_some() {
            return false;
        }
        self.residual_demand(scenario, task, Some(agent)) > 0
            && routing::cheapest_insertion(&self.routes[agent], task, 1, scenario).is_some()
    }

    /// ADD: join the coalition of `task` with `min(residual, max feasible payload)`.
    pub fn propose_add(&self, scenario: &Scenario, agent: usize, task: usize) -> Option<Self> {
        let (payload, ins) = self.plan_add(scenario, agent, task)?;
        Some(self.with_agent_update(scenario, agent, ins.route, ins.trace, &[(task, payload)]))
    }

    /// REMOVE: release the allocation of `task` and drop depot visits that
    /// are no longer needed.
    pub fn propose_remove(&self, scenario: &Scenario, agent: usize, task: usize) -> Result<Self, GameError> {
        let route = &self.routes[agent];
        let k = route.mutable_position_of(task).ok_or_else(|| {
            GameError::Logic(format!("task {task} is not in the mutable route of agent {agent}"))
        })?;
        if self.allocations[task].payload(agent) == 0 {
            return Err(GameError::Logic(format!("agent {agent} holds no allocation on task {task}")));
        }
        let mut route = route.clone();
        route.nodes.remove(k);
        routing::drop_redundant_depots(&mut route, scenario);
        let trace = routing::trace_route(&route, scenario).map_err(cost::CostError::from)?;
        Ok(self.with_agent_update(scenario, agent, route, trace, &[(task, 0)]))
    }

    /// Removal of the first mutable intermediate visit of `depot`, if the
    /// route stays feasible without it.
    pub fn propose_remove_depot(&self, scenario: &Scenario, agent: usize, depot: usize) -> Option<Self> {
        let route = &self.routes[agent];
        let last = route.nodes.len().checked_sub(1)?;
        (route.frozen.max(1)..last)
            .filter(|&k| route.nodes[k].node == NodeRef::Depot(depot))
            .find_map(|k| {
                let mut r = route.clone();
                r.nodes.remove(k);
                let trace = routing::trace_route(&r, scenario).ok()?;
                trace.feasible().then(|| self.with_agent_update(scenario, agent, r, trace, &[]))
            })
    }

    /// Cheapest feasible insertion of an extra visit to `depot`.
    pub fn propose_insert_depot(&self, scenario: &Scenario, agent: usize, depot: usize) -> Option<Self> {
        let route = &self.routes[agent];
        let len = route.nodes.len();
        if route.frozen >= len {
            return None;
        }
        let e_base = scenario.economic_base();
        let max_range = scenario.agents[agent].max_range_m;
        let mut best: Option<(f64, Route, RouteTrace)> = None;
        for p in route.frozen.max(1)..len {
            let mut r = route.clone();
            r.nodes.insert(p, routing::RouteNode::depot(depot));
            let trace = routing::trace_route(&r, scenario).ok()?;
            if !trace.feasible() || trace.total_distance() > max_range {
                continue;
            }
            let c = cost::route_op_cost(&r, &trace, scenario, e_base);
            if best.as_ref().is_none_or(|b| c < b.0) {
                best = Some((c, r, trace));
            }
        }
        best.map(|(_, r, t)| self.with_agent_update(scenario, agent, r, t, &[]))
    }

    /// The move an agent makes when it targets `node`: REMOVE when the task
    /// sits in its mutable suffix, ADD otherwise; depots toggle a visit.
    pub fn move_for(&self, agent: usize, node: NodeRef) -> Option<Move> {
        let route = &self.routes[agent];
        match node {
            NodeRef::Task(task) => match route.position_of(task) {
                Some(k) if k >= route.frozen => Some(Move::Remove { agent, task }),
                Some(_) => None,
                None => Some(Move::Add { agent, task }),
            },
            NodeRef::Depot(depot) => {
                let last = route.nodes.len().saturating_sub(1);
                let present = (route.frozen.max(1)..last).any(|k| route.nodes[k].node == node);
                Some(if present {
                    Move::RemoveDepot { agent, depot }
                } else {
                    Move::InsertDepot { agent, depot }
                })
            }
        }
    }

    /// Candidate structure for `mv`, or `None` when the move is not executable.
    pub fn propose(&self, scenario: &Scenario, mv: Move) -> Option<Self> {
        match mv {
            Move::Add { agent, task } => self.propose_add(scenario, agent, task),
            Move::Remove { agent, task } => self.propose_remove(scenario, agent, task).ok(),
            Move::InsertDepot { agent, depot } => self.propose_insert_depot(scenario, agent, depot),
            Move::RemoveDepot { agent, depot } => self.propose_remove_depot(scenario, agent, depot),
        }
    }

    /// Every move `agent` could attempt at the current time.
    pub fn moves_of(&self, scenario: &Scenario, agent: usize) -> Vec<Move> {
        let tasks = scenario.available_tasks(self.t_now).into_iter().map(NodeRef::Task);
        let depots = (0..scenario.depots.len()).map(NodeRef::Depot);
        tasks.chain(depots).filter_map(|node| self.move_for(agent, node)).collect()
    }
}

/// Serializable view of a structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub t_now: f64,
    pub total_cost: f64,
    pub allocations: Vec<TaskAllocationReport>,
    pub routes: Vec<RouteReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAllocationReport {
    pub task: String,
    pub demand_kg: u32,
    pub coalition: Vec<(String, u32)>,
    pub cost: Option<TaskCost>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteReport {
    pub agent: String,
    pub frozen: usize,
    pub nodes: Vec<RouteNodeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteNodeReport {
    pub node: String,
    pub payload_kg: u32,
    pub arrival_s: f64,
    pub delivery_load_kg: i64,
    pub pickup_load_kg: i64,
    pub distance_m: f64,
}

impl CoalitionStructure {
    pub fn report(&self, scenario: &Scenario) -> StructureReport {
        let name = |node: NodeRef| match node {
            NodeRef::Task(m) => scenario.tasks[m].id.clone(),
            NodeRef::Depot(d) => scenario.depots[d].id.clone(),
        };
        StructureReport {
            t_now: self.t_now,
            total_cost: self.total,
            allocations: self
                .allocations
                .iter()
                .enumerate()
                .map(|(m, a)| TaskAllocationReport {
                    task: scenario.tasks[m].id.clone(),
                    demand_kg: scenario.tasks[m].demand_kg,
                    coalition: a.0.iter().map(|(&n, &kg)| (scenario.agents[n].id.clone(), kg)).collect(),
                    cost: self.task_costs[m],
                })
                .collect(),
            routes: self
                .routes
                .iter()
                .zip(&self.traces)
                .map(|(r, t)| RouteReport {
                    agent: scenario.agents[r.agent].id.clone(),
                    frozen: r.frozen,
                    nodes: r
                        .nodes
                        .iter()
                        .zip(&t.nodes)
                        .map(|(n, nt)| RouteNodeReport {
                            node: name(n.node),
                            payload_kg: n.payload,
                            arrival_s: nt.arrival,
                            delivery_load_kg: nt.delivery_load,
                            pickup_load_kg: nt.pickup_load,
                            distance_m: nt.distance,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

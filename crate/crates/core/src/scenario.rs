//! World model: agents, tasks, depots, the scenario file format and the
//! random scenario generator.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::{self, Route};

/// The small-scale fixture (4 agents, 2 depots, 10 tasks with two arrival events).
pub const SMALL_SCALE_FIXTURE: &str = include_str!("../fixtures/smallscale.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot generate scenario: {0}")]
    Generation(String),
}

/// Planar position in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Self { x: v[0], y: v[1] }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    /// Type 1: slow, high payload, long range.
    Heavy,
    /// Type 2: fast, light payload, short range.
    Fast,
}

/// Raw row of the vehicle parameter table, in the units it is published in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawVehicleRow {
    pub speed_mps: f64,
    pub capacity_kg: u32,
    pub max_range_km: f64,
    /// Published as "20 km" / "10 km"; unit ambiguous.
    pub energy_rate_raw: f64,
    pub intrinsic_value: f64,
}

/// Normalized per-kind parameters used by the cost model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindParams {
    pub speed: f64,
    pub capacity: u32,
    pub max_range: f64,
    /// Cost units per meter.
    pub energy_rate: f64,
    pub intrinsic_value: f64,
}

impl AgentKind {
    pub fn raw_row(self) -> RawVehicleRow {
        match self {
            AgentKind::Heavy => RawVehicleRow {
                speed_mps: 10.0,
                capacity_kg: 30,
                max_range_km: 60.0,
                energy_rate_raw: 20.0,
                intrinsic_value: 2000.0,
            },
            AgentKind::Fast => RawVehicleRow {
                speed_mps: 20.0,
                capacity_kg: 10,
                max_range_km: 30.0,
                energy_rate_raw: 10.0,
                intrinsic_value: 500.0,
            },
        }
    }

    /// Normalization: range in meters, energy rate as raw / 1000 cost units per meter.
    pub fn params(self) -> KindParams {
        let raw = self.raw_row();
        KindParams {
            speed: raw.speed_mps,
            capacity: raw.capacity_kg,
            max_range: raw.max_range_km * 1000.0,
            energy_rate: raw.energy_rate_raw / 1000.0,
            intrinsic_value: raw.intrinsic_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Agent {
    pub id: String,
    pub kind: AgentKind,
    pub position: Point,
    pub speed_mps: f64,
    pub capacity_kg: u32,
    pub max_range_m: f64,
    pub energy_rate: f64,
    pub intrinsic_value: f64,
    pub home_depot: String,
}

impl Agent {
    /// Agent with the table parameters of its kind.
    pub fn of_kind(id: impl Into<String>, kind: AgentKind, position: Point, home_depot: impl Into<String>) -> Self {
        let p = kind.params();
        Self {
            id: id.into(),
            kind,
            position,
            speed_mps: p.speed,
            capacity_kg: p.capacity,
            max_range_m: p.max_range,
            energy_rate: p.energy_rate,
            intrinsic_value: p.intrinsic_value,
            home_depot: home_depot.into(),
        }
    }

    /// Maximum economic loss of this vehicle, `alpha * D_max + lambda`.
    pub fn economic_loss(&self) -> f64 {
        self.energy_rate * self.max_range_m + self.intrinsic_value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "P")]
    Pickup,
    #[serde(rename = "D")]
    Delivery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub kind: TaskKind,
    pub position: Point,
    pub demand_kg: u32,
    /// `[T_start, T_end]` in seconds.
    pub window_s: [f64; 2],
    pub release_s: f64,
}

impl Task {
    pub fn start(&self) -> f64 {
        self.window_s[0]
    }

    pub fn end(&self) -> f64 {
        self.window_s[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Depot {
    pub id: String,
    pub position: Point,
}

/// Cost weights `(w_load, w_time, w_op)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Weights {
    pub load: f64,
    pub time: f64,
    pub op: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { load: 100.0, time: 10.0, op: 1.0 }
    }
}

impl From<[f64; 3]> for Weights {
    fn from(v: [f64; 3]) -> Self {
        Self { load: v[0], time: v[1], op: v[2] }
    }
}

impl From<Weights> for [f64; 3] {
    fn from(w: Weights) -> Self {
        [w.load, w.time, w.op]
    }
}

/// Immutable world description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub agents: Vec<Agent>,
    pub tasks: Vec<Task>,
    pub depots: Vec<Depot>,
    pub weights: Weights,
    pub horizon_s: f64,
    pub area_side_m: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn small_scale() -> Self {
        Self::from_json(SMALL_SCALE_FIXTURE).expect("bundled fixture is valid")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.agents.is_empty() {
            return invalid("at least one agent is required".into());
        }
        if self.tasks.is_empty() {
            return invalid("at least one task is required".into());
        }
        if self.depots.is_empty() {
            return invalid("at least one depot is required".into());
        }
        let w = self.weights;
        if !(w.load >= 0.0 && w.time >= 0.0 && w.op >= 0.0) {
            return invalid(format!("weights must be nonnegative, got {:?}", w));
        }
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return invalid(format!("horizon_s must be positive, got {}", self.horizon_s));
        }
        if !(self.area_side_m > 0.0 && self.area_side_m.is_finite()) {
            return invalid(format!("area_side_m must be positive, got {}", self.area_side_m));
        }
        let mut ids = HashSet::new();
        let all_ids = self
            .agents
            .iter()
            .map(|a| &a.id)
            .chain(self.tasks.iter().map(|t| &t.id))
            .chain(self.depots.iter().map(|d| &d.id));
        for id in all_ids {
            if !ids.insert(id.as_str()) {
                return invalid(format!("duplicate id `{id}`"));
            }
        }
        for d in &self.depots {
            if !d.position.is_finite() {
                return invalid(format!("depot `{}` has a non-finite position", d.id));
            }
        }
        for a in &self.agents {
            if !a.position.is_finite() {
                return invalid(format!("agent `{}` has a non-finite position", a.id));
            }
            if !(a.speed_mps > 0.0 && a.speed_mps.is_finite()) {
                return invalid(format!("agent `{}`: speed must be positive", a.id));
            }
            if a.capacity_kg == 0 {
                return invalid(format!("agent `{}`: capacity must be positive", a.id));
            }
            if !(a.max_range_m > 0.0 && a.max_range_m.is_finite()) {
                return invalid(format!("agent `{}`: max range must be positive", a.id));
            }
            if !(a.energy_rate >= 0.0 && a.energy_rate.is_finite()) {
                return invalid(format!("agent `{}`: energy rate must be nonnegative", a.id));
            }
            if !(a.intrinsic_value >= 0.0 && a.intrinsic_value.is_finite()) {
                return invalid(format!("agent `{}`: intrinsic value must be nonnegative", a.id));
            }
            if self.depot_index(&a.home_depot).is_none() {
                return invalid(format!("agent `{}`: unknown home depot `{}`", a.id, a.home_depot));
            }
        }
        for t in &self.tasks {
            if !t.position.is_finite() {
                return invalid(format!("task `{}` has a non-finite position", t.id));
            }
            if t.demand_kg == 0 {
                return invalid(format!("task `{}`: demand must be at least 1 kg", t.id));
            }
            let [start, end] = t.window_s;
            if !(start.is_finite() && end.is_finite() && start <= end) {
                return invalid(format!("task `{}`: window [{start}, {end}] is not ordered", t.id));
            }
            if !(t.release_s >= 0.0 && t.release_s <= start) {
                return invalid(format!(
                    "task `{}`: release time {} must lie in [0, T_start]",
                    t.id, t.release_s
                ));
            }
        }
        Ok(())
    }

    pub fn depot_index(&self, id: &str) -> Option<usize> {
        self.depots.iter().position(|d| d.id == id)
    }

    pub fn agent_index(&self, id: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    /// Index of the agent's home depot. Panics on an unvalidated scenario.
    pub fn home_depot(&self, agent: usize) -> usize {
        self.depot_index(&self.agents[agent].home_depot)
            .expect("validated scenario has resolvable home depots")
    }

    /// Indices of the tasks released at or before `t`, in index order.
    pub fn available_tasks(&self, t: f64) -> Vec<usize> {
        self.tasks
            .iter()
            .enumerate()
            .filter(|(_, task)| task.release_s <= t)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_available(&self, task: usize, t: f64) -> bool {
        self.tasks[task].release_s <= t
    }

    /// Distinct release times in increasing order, always starting with 0.
    pub fn event_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.tasks.iter().map(|t| t.release_s).collect();
        times.push(0.0);
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// `E_base = max_i (alpha_i * D_i^max + lambda_i)`.
    pub fn economic_base(&self) -> f64 {
        self.agents.iter().map(Agent::economic_loss).fold(0.0, f64::max)
    }

    pub fn max_capacity(&self) -> u32 {
        self.agents.iter().map(|a| a.capacity_kg).max().unwrap_or(0)
    }

    pub fn max_speed(&self) -> f64 {
        self.agents.iter().map(|a| a.speed_mps).fold(0.0, f64::max)
    }

    pub fn max_range(&self) -> f64 {
        self.agents.iter().map(|a| a.max_range_m).fold(0.0, f64::max)
    }

    pub fn total_capacity(&self) -> u64 {
        self.agents.iter().map(|a| a.capacity_kg as u64).sum()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} agents / {} tasks / {} depots (seed {})",
            self.agents.len(),
            self.tasks.len(),
            self.depots.len(),
            self.seed
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowStyle {
    /// Start slack up to 300 s, width 900 to 1800 s.
    Loose,
    /// Start slack up to 120 s, width 400 to 900 s.
    Tight,
}

impl WindowStyle {
    fn start_slack(self) -> f64 {
        match self {
            WindowStyle::Loose => 300.0,
            WindowStyle::Tight => 120.0,
        }
    }

    fn width(self) -> (f64, f64) {
        match self {
            WindowStyle::Loose => (900.0, 1800.0),
            WindowStyle::Tight => (400.0, 900.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub agents: usize,
    pub tasks: usize,
    pub depots: usize,
    pub area_side_m: f64,
    /// Inclusive range of task demands in kg.
    pub demand_range: (u32, u32),
    pub window_style: WindowStyle,
    /// Fraction of tasks released after t = 0.
    pub arrival_fraction: f64,
    /// Number of distinct arrival events the dynamic tasks are spread over.
    pub arrival_events: usize,
    pub heavy_fraction: f64,
    pub horizon_s: f64,
    pub weights: Weights,
}

impl GeneratorConfig {
    /// `agents`/`tasks` scale with the remaining parameters at their defaults.
    pub fn scale(agents: usize, tasks: usize) -> Self {
        Self { agents, tasks, ..Self::default() }
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            agents: 4,
            tasks: 10,
            depots: 2,
            area_side_m: 10_000.0,
            demand_range: (5, 40),
            window_style: WindowStyle::Loose,
            arrival_fraction: 0.4,
            arrival_events: 2,
            heavy_fraction: 0.5,
            horizon_s: 3600.0,
            weights: Weights::default(),
        }
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 200;

/// Deterministic random scenario.
///
/// Every task is placed so that the agents able to reach it on time from an
/// idle start (at its release time) jointly carry at least its demand.
pub fn generate_scenario(cfg: &GeneratorConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    let gen_err = |m: String| Err(ScenarioError::Generation(m));
    if cfg.agents == 0 || cfg.tasks == 0 || cfg.depots == 0 {
        return gen_err(format!(
            "counts must be at least 1 (agents={}, tasks={}, depots={})",
            cfg.agents, cfg.tasks, cfg.depots
        ));
    }
    if !(cfg.area_side_m > 0.0) || !(cfg.horizon_s > 0.0) {
        return gen_err("area_side_m and horizon_s must be positive".into());
    }
    if !(0.0..=1.0).contains(&cfg.arrival_fraction) || !(0.0..=1.0).contains(&cfg.heavy_fraction) {
        return gen_err("arrival_fraction and heavy_fraction must lie in [0, 1]".into());
    }
    let (lo, hi) = cfg.demand_range;
    if lo == 0 || lo > hi {
        return gen_err(format!("demand_range [{lo}, {hi}] must satisfy 1 <= lo <= hi"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = cfg.area_side_m / 2.0;
    let point = |rng: &mut ChaCha8Rng| {
        Point::new(
            rng.gen_range(-half..=half).round(),
            rng.gen_range(-half..=half).round(),
        )
    };

    let depots: Vec<Depot> = (0..cfg.depots)
        .map(|k| Depot { id: format!("D_{k}"), position: point(&mut rng) })
        .collect();

    let agents: Vec<Agent> = (0..cfg.agents)
        .map(|n| {
            let kind = if rng.gen_bool(cfg.heavy_fraction) { AgentKind::Heavy } else { AgentKind::Fast };
            let position = point(&mut rng);
            let home = nearest_depot(&depots, position);
            Agent::of_kind(format!("A_{n}"), kind, position, depots[home].id.clone())
        })
        .collect();

    let total_capacity: u64 = agents.iter().map(|a| a.capacity_kg as u64).sum();
    if hi as u64 > total_capacity {
        return gen_err(format!(
            "demand_range upper bound {hi} kg exceeds total fleet capacity {total_capacity} kg"
        ));
    }

    let mut events: Vec<f64> = (0..cfg.arrival_events.max(1))
        .map(|_| (rng.gen_range(0.05..0.4) * cfg.horizon_s).round().max(1.0))
        .collect();
    events.sort_by(f64::total_cmp);
    events.dedup();

    let dynamic_count = ((cfg.tasks as f64) * cfg.arrival_fraction).round() as usize;
    let mut order: Vec<usize> = (0..cfg.tasks).collect();
    order.shuffle(&mut rng);
    let mut release = vec![0.0; cfg.tasks];
    for &m in order.iter().take(dynamic_count) {
        release[m] = events[rng.gen_range(0..events.len())];
    }

    let mut scenario = Scenario {
        agents,
        tasks: Vec::with_capacity(cfg.tasks),
        depots,
        weights: cfg.weights,
        horizon_s: cfg.horizon_s,
        area_side_m: cfg.area_side_m,
        seed,
    };

    let (w_lo, w_hi) = cfg.window_style.width();
    for (m, &release_s) in release.iter().enumerate() {
        let kind = if rng.gen_bool(0.5) { TaskKind::Pickup } else { TaskKind::Delivery };
        let demand_kg = rng.gen_range(lo..=hi);
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let start = (release_s + rng.gen_range(0.0..=cfg.window_style.start_slack())).round();
            let end = (start + rng.gen_range(w_lo..=w_hi)).round().min(cfg.horizon_s).max(start);
            let task = Task {
                id: format!("T_{m}"),
                kind,
                position: point(&mut rng),
                demand_kg,
                window_s: [start, end],
                release_s,
            };
            if reachable_capacity(&scenario, &task) >= demand_kg as u64 {
                placed = Some(task);
                break;
            }
        }
        match placed {
            Some(task) => scenario.tasks.push(task),
            None => {
                return gen_err(format!(
                    "task T_{m} (demand {demand_kg} kg, release {release_s} s) could not be placed \
                     within reach of enough fleet capacity"
                ))
            }
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

fn nearest_depot(depots: &[Depot], p: Point) -> usize {
    depots
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            routing::leg_length(a.position, p).total_cmp(&routing::leg_length(b.position, p))
        })
        .map(|(i, _)| i)
        .expect("at least one depot")
}

/// Total capacity of the agents that could serve `task` alone from an idle
/// route frozen at the task's release time.
fn reachable_capacity(scenario: &Scenario, task: &Task) -> u64 {
    let mut probe = scenario.clone();
    probe.tasks.push(task.clone());
    let m = probe.tasks.len() - 1;
    (0..probe.agents.len())
        .filter(|&n| {
            let route = Route::idle(&probe, n);
            let trace = routing::trace_route(&route, &probe).expect("idle route is well formed");
            let route = routing::freeze_until(&route, &trace, task.release_s);
            routing::cheapest_insertion(&route, m, 1, &probe).is_some()
        })
        .map(|n| probe.agents[n].capacity_kg as u64)
        .sum()
}

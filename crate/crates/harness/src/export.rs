//! CSV schemas. Every file starts with a header row; floats use the shortest
//! round-tripping representation, so equal values give equal bytes.

use std::io::Write;

use ocf_core::game::{CoalitionStructure, DecisionRecord, DecisionSource, EventOutcome, Termination};
use ocf_core::routing::NodeRef;
use ocf_core::scenario::Scenario;
use ocf_core::tsac::CurvePoint;
use serde::Serialize;

use crate::bench::BenchReport;
use crate::sim::{DemandClass, Timeline};

fn node_name(scenario: &Scenario, node: NodeRef) -> String {
    match node {
        NodeRef::Task(m) => scenario.tasks[m].id.clone(),
        NodeRef::Depot(d) => scenario.depots[d].id.clone(),
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DecisionRow<'a> {
    event_time: f64,
    k: usize,
    agent: &'a str,
    m_star: String,
    op: &'a str,
    delta_j: Option<f64>,
    accepted: bool,
    c: usize,
    tabu_size: usize,
    cost: f64,
    source: &'a str,
}

/// Per-decision trace: `event_time, k, agent, m_star, op, delta_j, accepted,
/// c, tabu_size, cost, source`. `m_star` and `op` are empty when every
/// candidate was masked; `op` is empty when the move was not executable.
pub fn write_decisions<W: Write>(out: W, scenario: &Scenario, events: &[EventOutcome], traces: &[Vec<DecisionRecord>]) -> csv::Result<()> {
    let rows = events.iter().zip(traces).flat_map(|(e, trace)| {
        trace.iter().map(move |r| DecisionRow {
            event_time: e.time,
            k: r.k,
            agent: &scenario.agents[r.agent].id,
            m_star: r.target.map(|t| node_name(scenario, t)).unwrap_or_default(),
            op: r.op.map(|m| m.label()).unwrap_or(""),
            delta_j: r.delta_j,
            accepted: r.accepted,
            c: r.c,
            tabu_size: r.tabu_size,
            cost: r.cost,
            source: match r.source {
                DecisionSource::Policy => "policy",
                DecisionSource::Stabilizer => "stabilizer",
            },
        })
    });
    write_rows(out, rows)
}

#[derive(Serialize)]
struct RouteRow<'a> {
    agent: &'a str,
    index: usize,
    node: String,
    payload_kg: u32,
    frozen: bool,
    tau_s: f64,
    delivery_load_kg: i64,
    pickup_load_kg: i64,
    distance_m: f64,
}

/// Route trace: `agent, index, node, payload_kg, frozen, tau_s,
/// delivery_load_kg, pickup_load_kg, distance_m`.
pub fn write_routes<W: Write>(out: W, scenario: &Scenario, structure: &CoalitionStructure) -> csv::Result<()> {
    let rows = (0..scenario.agents.len()).flat_map(|n| {
        let route = structure.route(n);
        let trace = structure.trace(n);
        route.nodes.iter().zip(&trace.nodes).enumerate().map(move |(k, (node, t))| RouteRow {
            agent: &scenario.agents[n].id,
            index: k,
            node: node_name(scenario, node.node),
            payload_kg: node.payload,
            frozen: k < route.frozen,
            tau_s: t.arrival,
            delivery_load_kg: t.delivery_load,
            pickup_load_kg: t.pickup_load,
            distance_m: t.distance,
        })
    });
    write_rows(out, rows)
}

#[derive(Serialize)]
struct EventRow {
    time: f64,
    cost_before: f64,
    cost_after: f64,
    decisions: usize,
    accepted: usize,
    sweeps: usize,
    termination: &'static str,
    improving_left: Option<usize>,
}

/// Event timeline: `time, cost_before, cost_after, decisions, accepted,
/// sweeps, termination, improving_left`.
pub fn write_timeline<W: Write>(out: W, events: &[EventOutcome]) -> csv::Result<()> {
    write_rows(
        out,
        events.iter().map(|e| EventRow {
            time: e.time,
            cost_before: e.cost_before,
            cost_after: e.cost_after,
            decisions: e.decisions,
            accepted: e.accepted,
            sweeps: e.sweeps,
            termination: match e.termination {
                Termination::Quiescent => "quiescent",
                Termination::IterationLimit => "iteration_limit",
            },
            improving_left: e.improving_left,
        }),
    )
}

#[derive(Serialize)]
struct EventTimingRow {
    time: f64,
    wall_s: f64,
}

/// Wall time per event: `time, wall_s`.
pub fn write_event_timing<W: Write>(out: W, events: &[EventOutcome]) -> csv::Result<()> {
    write_rows(out, events.iter().map(|e| EventTimingRow { time: e.time, wall_s: e.wall_s }))
}

#[derive(Serialize)]
struct TaskRow<'a> {
    task: &'a str,
    demand_kg: u32,
    class: &'static str,
    coalition_size: usize,
    allocated_kg: u64,
    load: f64,
    time: f64,
    op: f64,
    total: f64,
}

/// Final per-task cost: `task, demand_kg, class, coalition_size,
/// allocated_kg, load, time, op, total`.
pub fn write_task_costs<W: Write>(out: W, scenario: &Scenario, timeline: &Timeline) -> csv::Result<()> {
    let rows = scenario.tasks.iter().enumerate().filter_map(|(m, task)| {
        let c = timeline.breakdown.tasks[m]?;
        let alloc = &timeline.structure.allocations()[m];
        Some(TaskRow {
            task: &task.id,
            demand_kg: task.demand_kg,
            class: DemandClass::of(scenario, m).label(),
            coalition_size: alloc.coalition_size(),
            allocated_kg: alloc.total(),
            load: c.load,
            time: c.time,
            op: c.op,
            total: c.total,
        })
    });
    write_rows(out, rows)
}

#[derive(Serialize)]
struct HistogramRow {
    class: &'static str,
    coalition_size: usize,
    tasks: usize,
}

/// Coalition-size histogram: `class, coalition_size, tasks`.
pub fn write_histogram<W: Write>(out: W, timeline: &Timeline) -> csv::Result<()> {
    write_rows(
        out,
        timeline.histogram.iter().map(|(&(class, size), &tasks)| HistogramRow { class: class.label(), coalition_size: size, tasks }),
    )
}

/// Per-run results: `scale, policy, run, seed, final_cost, decisions,
/// accepted, quiescent, stable`.
pub fn write_bench_runs<W: Write>(out: W, report: &BenchReport) -> csv::Result<()> {
    write_rows(out, &report.runs)
}

/// Aggregates: `scale, policy, runs, mean, median, q1, q3, iqr, outliers,
/// stability_rate`.
pub fn write_bench_summary<W: Write>(out: W, report: &BenchReport) -> csv::Result<()> {
    write_rows(out, &report.rows)
}

/// Wall-clock aggregates: `scale, policy, runs, mean_wall_per_solve_s,
/// max_wall_per_run_s`.
pub fn write_bench_timing<W: Write>(out: W, report: &BenchReport) -> csv::Result<()> {
    write_rows(out, &report.timing)
}

/// Learning curve: `episode, episode_return, final_cost, entropy,
/// critic_loss, actor_loss, decisions`.
pub fn write_curve<W: Write>(out: W, curve: &[CurvePoint]) -> csv::Result<()> {
    write_rows(out, curve)
}

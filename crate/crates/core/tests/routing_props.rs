use ocf_core::cost::route_op_cost;
use ocf_core::routing::*;
use ocf_core::scenario::{generate_scenario, GeneratorConfig, Point, Scenario, TaskKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coord() -> impl Strategy<Value = f64> {
    (-5000i32..=5000).prop_map(f64::from)
}

fn point() -> impl Strategy<Value = Point> {
    (coord(), coord()).prop_map(|(x, y)| Point::new(x, y))
}

/// Random route of agent `n` with up to `max_tasks` tasks and an occasional
/// intermediate depot visit.
fn random_route(s: &Scenario, rng: &mut ChaCha8Rng, max_tasks: usize) -> Route {
    let n = rng.gen_range(0..s.agents.len());
    let cap = s.agents[n].capacity_kg;
    let mut ids: Vec<usize> = (0..s.tasks.len()).collect();
    ids.shuffle(rng);
    let k = rng.gen_range(0..=max_tasks.min(ids.len() - 1));
    let home = s.home_depot(n);
    let mut nodes = vec![RouteNode::depot(home)];
    for &m in &ids[..k] {
        if rng.gen_bool(0.2) {
            nodes.push(RouteNode::depot(rng.gen_range(0..s.depots.len())));
        }
        let a = rng.gen_range(1..=s.tasks[m].demand_kg.min(cap));
        nodes.push(RouteNode::task(m, a));
    }
    nodes.push(RouteNode::depot(home));
    Route { agent: n, nodes, frozen: 1 }
}

/// Exhaustive enumeration of insertion positions, plain first, then with a
/// preceding depot visit.
fn brute_force_insertion(route: &Route, task: usize, payload: u32, s: &Scenario) -> Option<(usize, Option<usize>, f64)> {
    let e_base = s.economic_base();
    let base = route_op_cost(route, &trace_route(route, s).unwrap(), s, e_base);
    let agent = &s.agents[route.agent];
    let try_all = |depot: Option<usize>| {
        let mut best: Option<(usize, Option<usize>, f64)> = None;
        for p in 1..route.len() {
            let mut nodes = route.nodes.clone();
            nodes.insert(p, RouteNode::task(task, payload));
            let mut index = p;
            if let Some(d) = depot {
                nodes.insert(p, RouteNode::depot(d));
                index += 1;
            }
            let cand = Route { nodes, ..route.clone() };
            let tr = trace_route(&cand, s).unwrap();
            if !tr.feasible() || tr.nodes[index].arrival > s.tasks[task].end() || tr.total_distance() > agent.max_range_m {
                continue;
            }
            let inc = route_op_cost(&cand, &tr, s, e_base) - base;
            if best.is_none_or(|b| inc < b.2) {
                best = Some((index, depot, inc));
            }
        }
        best
    };
    try_all(None).or_else(|| (0..s.depots.len()).filter_map(|d| try_all(Some(d))).fold(None, |acc, c| match acc {
        Some(a) if a.2 <= c.2 => Some(a),
        _ => Some(c),
    }))
}

proptest! {
    #[test]
    fn leg_length_is_a_metric(p in point(), q in point(), r in point()) {
        let d = leg_length(p, q);
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, leg_length(q, p));
        prop_assert_eq!(d == 0.0, p == q);
        prop_assert!(leg_length(p, r) <= d + leg_length(q, r) + 1e-9);
    }

    #[test]
    fn traces_are_monotone_and_reset_at_depots(seed in 0u64..500) {
        let s = generate_scenario(&GeneratorConfig::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let route = random_route(&s, &mut rng, 6);
        let tr = trace_route(&route, &s).unwrap();
        prop_assert_eq!(tr.nodes.len(), route.len());
        for k in 1..tr.nodes.len() {
            prop_assert!(tr.nodes[k].arrival >= tr.nodes[k - 1].arrival);
            prop_assert!(tr.nodes[k].distance >= tr.nodes[k - 1].distance);
            if let NodeRef::Task(m) = route.nodes[k].node {
                prop_assert!(tr.nodes[k].arrival >= s.tasks[m].start());
            }
        }
        for (k, n) in route.nodes.iter().enumerate() {
            if n.node.is_depot() {
                prop_assert_eq!(tr.nodes[k].pickup_load, 0);
                prop_assert!(tr.nodes[k].delivery_load <= s.agents[route.agent].capacity_kg as i64);
            }
        }
        // Node 0 sits at the agent's start; every later leg is counted once.
        let mut at = s.agents[route.agent].position;
        let mut flown = 0.0;
        for n in &route.nodes[1..] {
            let next = node_position(n.node, &s);
            flown += leg_length(at, next);
            at = next;
        }
        prop_assert!((tr.total_distance() - flown).abs() < 1e-6);
        if tr.feasible() {
            prop_assert!(tr.nodes.iter().all(|n| n.delivery_load >= 0 && n.pickup_load >= 0));
        }
    }

    #[test]
    fn cheapest_insertion_matches_enumeration(seed in 0u64..400) {
        let s = generate_scenario(&GeneratorConfig::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let route = random_route(&s, &mut rng, 5);
        prop_assume!(route.len() <= 8);
        let free: Vec<usize> = (0..s.tasks.len()).filter(|&m| route.position_of(m).is_none()).collect();
        let m = *free.choose(&mut rng).unwrap();
        let a = rng.gen_range(1..=s.tasks[m].demand_kg.min(s.agents[route.agent].capacity_kg));
        let got = cheapest_insertion(&route, m, a, &s);
        let oracle = brute_force_insertion(&route, m, a, &s);
        match (got, oracle) {
            (None, None) => {}
            (Some(ins), Some((_, depot, inc))) => {
                prop_assert!((ins.op_increase - inc).abs() < 1e-12, "{} vs {}", ins.op_increase, inc);
                prop_assert_eq!(ins.depot.is_some(), depot.is_some());
                prop_assert!(ins.trace.feasible());
                prop_assert_eq!(ins.route.nodes[ins.index], RouteNode::task(m, a));
                prop_assert_eq!(ins.route.len(), route.len() + 1 + usize::from(ins.depot.is_some()));
            }
            (g, o) => prop_assert!(false, "insertion {:?} vs oracle {:?}", g.map(|i| i.index), o),
        }
    }

    #[test]
    fn max_feasible_payload_is_the_largest_insertable(seed in 0u64..150) {
        let s = generate_scenario(&GeneratorConfig::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        let route = random_route(&s, &mut rng, 3);
        let free: Vec<usize> = (0..s.tasks.len()).filter(|&m| route.position_of(m).is_none()).collect();
        let m = *free.choose(&mut rng).unwrap();
        let cap = s.tasks[m].demand_kg;
        let linear = (1..=cap).rev().find(|&a| cheapest_insertion(&route, m, a, &s).is_some());
        prop_assert_eq!(max_feasible_insertion(&route, m, cap, &s).map(|(a, _)| a), linear);
    }

    #[test]
    fn frozen_prefix_is_never_touched_by_insertion(seed in 0u64..150, cut in 0.0f64..1.0) {
        let s = generate_scenario(&GeneratorConfig::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        let route = random_route(&s, &mut rng, 4);
        let tr = trace_route(&route, &s).unwrap();
        let t = cut * tr.nodes.last().unwrap().arrival;
        let frozen = freeze_until(&route, &tr, t);
        prop_assert!(frozen.frozen >= 1);
        prop_assert!(tr.nodes[..frozen.frozen].iter().skip(1).all(|n| n.arrival <= t));
        let free: Vec<usize> = (0..s.tasks.len()).filter(|&m| route.position_of(m).is_none()).collect();
        let m = *free.choose(&mut rng).unwrap();
        if let Some(ins) = cheapest_insertion(&frozen, m, 1, &s) {
            prop_assert_eq!(&ins.route.nodes[..frozen.frozen], &frozen.nodes[..frozen.frozen]);
            prop_assert!(ins.index >= frozen.frozen);
        }
    }
}

#[test]
fn arrival_waits_for_window_start() {
    let mut s = Scenario::small_scale();
    let a = s.agents[0].clone();
    s.depots[0].position = a.position;
    // A node 500 m from the start with T_start = 120 s, after a 100 s wait.
    s.tasks[0].position = Point::new(a.position.x + 500.0, a.position.y);
    s.tasks[0].window_s = [120.0, 400.0];
    s.tasks[0].release_s = 0.0;
    let route = Route { agent: 0, nodes: vec![RouteNode::depot(0), RouteNode::task(0, 1), RouteNode::depot(0)], frozen: 1 };
    let tr = trace_route_from(&route, &s, Departure { time: 100.0, position: a.position }).unwrap();
    assert_eq!(tr.nodes[1].arrival, 150.0);
    s.tasks[0].window_s = [170.0, 400.0];
    let tr = trace_route_from(&route, &s, Departure { time: 100.0, position: a.position }).unwrap();
    assert_eq!(tr.nodes[1].arrival, 170.0);
}

#[test]
fn depot_loads_at_most_capacity() {
    let s = Scenario::small_scale();
    let deliveries: Vec<usize> = (0..s.tasks.len()).filter(|&m| s.tasks[m].kind == TaskKind::Delivery).collect();
    assert!(deliveries.len() >= 2);
    // Heavy agent, capacity 30 kg, with 40 kg of deliveries scheduled.
    let nodes = vec![
        RouteNode::depot(0),
        RouteNode::task(deliveries[0], 20),
        RouteNode::task(deliveries[1], 20),
        RouteNode::depot(0),
    ];
    let tr = trace_route(&Route { agent: 0, nodes, frozen: 1 }, &s).unwrap();
    assert_eq!(tr.nodes[0].delivery_load, 30);
    assert!(!tr.feasible());
}

#[test]
fn freeze_bounds() {
    let s = generate_scenario(&GeneratorConfig::default(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let route = random_route(&s, &mut rng, 4);
    let tr = trace_route(&route, &s).unwrap();
    let last = tr.nodes.last().unwrap().arrival;
    assert_eq!(freeze_until(&route, &tr, last).frozen, route.len());
    if tr.nodes[1].arrival > 0.0 {
        assert_eq!(freeze_until(&route, &tr, 0.0).frozen, 1);
    }
}

#[test]
fn passed_deadline_is_infeasible() {
    let s = Scenario::small_scale();
    let mut late = s.clone();
    late.tasks[9].window_s[1] = late.tasks[9].window_s[0];
    let route = Route::idle(&late, 0);
    let far = leg_length(late.agents[0].position, late.tasks[9].position) / late.agents[0].speed_mps;
    assert!(far > late.tasks[9].end());
    assert!(cheapest_insertion(&route, 9, 1, &late).is_none());
}

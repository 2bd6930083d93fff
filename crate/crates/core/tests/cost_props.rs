use ocf_core::cost::{evaluate, load_cost, time_cost, Member};
use ocf_core::game::{CoalitionStructure, Move};
use ocf_core::scenario::{generate_scenario, GeneratorConfig, Scenario, TaskKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Executable random move, if the agent has any.
fn random_move(c: &CoalitionStructure, s: &Scenario, rng: &mut ChaCha8Rng) -> Option<(Move, CoalitionStructure)> {
    let mut agents: Vec<usize> = (0..s.agents.len()).collect();
    agents.shuffle(rng);
    for n in agents {
        let mut moves = c.moves_of(s, n);
        moves.shuffle(rng);
        if let Some(found) = moves.into_iter().find_map(|mv| c.propose(s, mv).map(|next| (mv, next))) {
            return Some(found);
        }
    }
    None
}

fn coalition_tasks(c: &CoalitionStructure, agent: usize) -> Vec<usize> {
    c.allocations().iter().enumerate().filter(|(_, a)| a.payload(agent) > 0).map(|(m, _)| m).collect()
}

#[test]
fn incremental_costs_match_full_recomputation_on_random_walks() {
    let mut moves = 0;
    let mut seed = 0u64;
    while moves < 1000 {
        let s = generate_scenario(&GeneratorConfig::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times = s.event_times();
        let mut c = CoalitionStructure::empty(&s, times[0]);
        for step in 0..60 {
            if step == 30 && times.len() > 1 {
                c.advance(&s, times[1]);
            }
            let Some((mv, next)) = random_move(&c, &s, &mut rng) else { break };
            let before = c.breakdown(&s);
            let after = next.breakdown(&s);
            assert!((next.cost() - after.total).abs() < 1e-9, "seed {seed} step {step}: {} vs {}", next.cost(), after.total);
            assert!((after.potential - after.total).abs() < 1e-9);
            let (dphi, dj) = (after.potential - before.potential, next.cost() - c.cost());
            assert!((dphi - dj).abs() < 1e-9, "{dphi} vs {dj}");

            // Locality: only tasks of the mover's old or new coalition change.
            let n = mv.agent();
            let mut touched = coalition_tasks(&c, n);
            touched.extend(coalition_tasks(&next, n));
            for m in 0..s.tasks.len() {
                if !touched.contains(&m) {
                    assert_eq!(
                        c.task_cost(m).map(|t| t.total.to_bits()),
                        next.task_cost(m).map(|t| t.total.to_bits()),
                        "task {m} changed under {mv:?}"
                    );
                }
            }
            for n2 in 0..s.agents.len() {
                if n2 != n {
                    assert_eq!(c.route(n2), next.route(n2));
                    assert_eq!(c.route_cost(n2).to_bits(), next.route_cost(n2).to_bits());
                }
            }
            c = next;
            moves += 1;
        }
        seed += 1;
    }
}

#[test]
fn add_delta_is_task_delta_plus_own_op_delta() {
    let s = generate_scenario(&GeneratorConfig::default(), 11).unwrap();
    let c = CoalitionStructure::empty(&s, 0.0);
    let w = s.weights;
    let mut checked = 0;
    for n in 0..s.agents.len() {
        for m in s.available_tasks(0.0) {
            let Some(next) = c.propose_add(&s, n, m) else { continue };
            let full = evaluate(&s, next.allocations(), next.routes(), 0.0).unwrap();
            let task_delta = next.task_cost(m).unwrap().total - c.task_cost(m).unwrap().total;
            // Task m carries the whole op increase of the idle agent.
            assert!((full.total - c.cost() - task_delta).abs() < 1e-9);
            let op_delta = next.route_cost(n) - c.route_cost(n);
            let service = |x: &CoalitionStructure| {
                let t = x.task_cost(m).unwrap();
                w.load * t.load + w.time * t.time
            };
            assert!((full.total - c.cost() - (service(&next) - service(&c) + w.op * op_delta)).abs() < 1e-9);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn all_unallocated_costs_load_plus_time_weight_per_released_task() {
    for seed in 0..20 {
        let s = generate_scenario(&GeneratorConfig::default(), seed).unwrap();
        for t in s.event_times() {
            let c = CoalitionStructure::empty(&s, t);
            let released = s.available_tasks(t).len() as f64;
            assert_eq!(c.cost(), released * (s.weights.load + s.weights.time));
            assert_eq!(c.breakdown(&s).unserved, c.cost());
        }
    }
}

proptest! {
    #[test]
    fn cost_terms_stay_in_bounds(seed in 0u64..200, steps in 0usize..25) {
        let s = generate_scenario(&GeneratorConfig::default(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = CoalitionStructure::empty(&s, 0.0);
        for _ in 0..steps {
            match random_move(&c, &s, &mut rng) {
                Some((_, next)) => c = next,
                None => break,
            }
        }
        let e_base = s.economic_base();
        for t in c.task_costs().iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&t.load));
            prop_assert!((0.0..=1.0).contains(&t.time));
            prop_assert!(t.op >= 0.0);
        }
        for n in 0..s.agents.len() {
            prop_assert!(c.route_cost(n) <= s.agents[n].economic_loss() / e_base + 1e-12);
        }
    }

    #[test]
    fn load_cost_is_the_uncovered_fraction(demand in 1u32..100, payloads in prop::collection::vec((0u32..60, 0.0f64..300.0), 0..5)) {
        let task = ocf_core::scenario::Task {
            id: "T".into(),
            kind: TaskKind::Pickup,
            position: ocf_core::scenario::Point::new(0.0, 0.0),
            demand_kg: demand,
            window_s: [50.0, 200.0],
            release_s: 0.0,
        };
        let members: Vec<Member> = payloads.iter().enumerate().map(|(n, &(p, t))| Member { agent: n, payload: p, arrival: t }).collect();
        let on_time: u32 = members.iter().filter(|m| m.arrival <= 200.0).map(|m| m.payload).sum();
        let oracle = if members.is_empty() { 1.0 } else { (demand as f64 - on_time as f64).max(0.0) / demand as f64 };
        prop_assert!((load_cost(&task, &members) - oracle).abs() < 1e-15);
        let tc = time_cost(&task, &members, 3600.0);
        prop_assert!((0.0..=1.0).contains(&tc));
        let active: Vec<&Member> = members.iter().filter(|m| m.payload > 0).collect();
        if active.is_empty() || active.iter().any(|m| m.arrival > 200.0) {
            prop_assert_eq!(tc, 1.0);
        }
    }
}

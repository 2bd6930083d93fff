//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use ocf_core::game::{CoalitionStructure, EngineConfig};
use ocf_core::policy::{build_state, Policy, SelectMode};
use ocf_core::scenario::{generate_scenario, GeneratorConfig, Scenario};
use ocf_core::tsac::*;
use ocf_harness::bench::{monte_carlo, sign_test, BenchConfig, Scale};
use ocf_harness::export;
use ocf_harness::sim::{simulate, DemandClass};
use ocf_harness::verify::{scaling, verify, VerifyConfig, SLOPE_BOUND};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Training run used by the policy-quality criterion. Hyperparameters were
/// picked on seeds 5000..5100; the default optimizer is kept.
fn training_config() -> TrainConfig {
    TrainConfig {
        episodes: 200,
        seed: 0,
        lr: 3e-3,
        alpha: 0.01,
        gamma: 0.5,
        batch_size: 32,
        net: NetConfig { d_model: 32, heads: 2, layers: 1, hidden: 32, ..NetConfig::default() },
        generator: GeneratorConfig::scale(4, 10),
        ..TrainConfig::default()
    }
}

/// First seed of the held-out evaluation scenarios, disjoint from the tuning
/// seeds; training draws from `TRAIN_SEED_OFFSET` upwards.
const EVAL_SEED: u64 = 20_000;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn small_scale_reproduction() -> Outcome {
    let s = Scenario::small_scale();
    let task = s.task_index("T_7").expect("fixture has T_7");
    let expected: BTreeSet<usize> = (0..4).map(|i| s.agent_index(&format!("A_{i}")).expect("fixture agent")).collect();
    let mut lines = Vec::new();
    let mut passed = false;
    for policy in [Policy::Heuristic] {
        let started = Instant::now();
        let t = simulate(&s, &policy, &EngineConfig::default());
        let wall = started.elapsed().as_secs_f64();
        let last = t.events.last().expect("at least one event");
        let alloc = &t.structure.allocations()[task];
        let members: BTreeSet<usize> = alloc.coalition().collect();
        let total = alloc.total();
        let late: Vec<String> = members
            .iter()
            .filter_map(|&n| {
                let at = t.structure.arrival(n, task)?;
                (at > s.tasks[task].window_s[1]).then(|| format!("{} at {at:.1} s", s.agents[n].id))
            })
            .collect();
        let ok = last.time == 90.0 && members == expected && total == s.tasks[task].demand_kg as u64 && late.is_empty() && wall < 10.0;
        passed |= ok;
        let names: Vec<&str> = members.iter().map(|&n| s.agents[n].id.as_str()).collect();
        lines.push(format!(
            "{}: Coal(T_7) = {{{}}}, {total} kg, late [{}], {wall:.2} s",
            policy.name(),
            names.join(", "),
            late.join(", ")
        ));
    }
    Outcome::new(passed, lines.join("; "))
}

fn potential_game_invariants() -> Outcome {
    let cfg = VerifyConfig { samples: 100, repeats: 4, scaling_tasks: Vec::new(), ..VerifyConfig::default() };
    let r = verify(&cfg).expect("scenario generation");
    let mut detail = format!(
        "{} accepted moves over {} scenarios, {} quiescent solves ({} stable), {} violations",
        r.accepted_moves,
        r.scenarios,
        r.quiescent_solves,
        r.stable_quiescent_solves,
        r.violations.len()
    );
    if let Some(v) = r.violations.first() {
        detail.push_str(&format!("; first: {:?} seed {} {}: {}", v.check, v.scenario_seed, v.policy, v.detail));
    }
    Outcome::new(r.passed() && r.accepted_moves >= 10_000, detail)
}

fn finite_convergence() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (scale, n) in [(Scale::new(4, 10), 100u64), (Scale::new(8, 20), 20)] {
        for seed in 0..n {
            let s = generate_scenario(&scale.generator(), seed).expect("scenario generation");
            for policy in [Policy::Random, Policy::Heuristic] {
                let engine = EngineConfig::with_seed(seed);
                let budget = engine.max_sweeps * s.agents.len();
                let started = Instant::now();
                let t = simulate(&s, &policy, &engine);
                let wall = started.elapsed().as_secs_f64();
                worst = worst.max(wall);
                runs += 1;
                if t.events.iter().any(|e| e.decisions >= budget) || wall >= 60.0 {
                    failures.push(format!("{} seed {seed} {}", scale.label(), policy.name()));
                }
            }
        }
    }
    Outcome::new(failures.is_empty(), format!("{runs} runs, {} over budget, slowest {worst:.3} s {:?}", failures.len(), failures))
}

fn toy() -> NetConfig {
    NetConfig { d_model: 8, heads: 2, layers: 2, hidden: 8, ..NetConfig::default() }
}

fn random_transitions(n: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = |rng: &mut ChaCha8Rng| {
        let len = rng.gen_range(2..7);
        let mut mask: Vec<f64> = (0..len).map(|_| if rng.gen_bool(0.3) { f64::NEG_INFINITY } else { 0.0 }).collect();
        mask[rng.gen_range(0..len)] = 0.0;
        NetInput {
            agent: (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            candidates: (0..len).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            depot: (0..len).map(|i| i + 2 >= len).collect(),
            mask,
        }
    };
    (0..n)
        .map(|_| {
            let state = input(&mut rng);
            let action = state.mask.iter().position(|&m| m == 0.0).unwrap();
            Transition { action, reward: rng.gen_range(-1.0..1.0), next: input(&mut rng), done: rng.gen_bool(0.2), state }
        })
        .collect()
}

fn neural_verification() -> Outcome {
    let net = PolicyNetwork::new(toy(), 3);
    let ts = random_transitions(6, 4);
    let refs: Vec<&Transition> = ts.iter().collect();
    let y = target_values(&net.live, &net.target, &refs, 0.9, 0.2);
    let states: Vec<&NetInput> = ts.iter().map(|t| &t.state).collect();
    let pb = padded_batch(&states);
    let actions: Vec<usize> = ts.iter().map(|t| t.action).collect();

    let critic_grad = critic_loss(&net.live, &pb, &actions, &y).grad;
    let critic_err = grad_check(
        &net.live,
        &critic_grad,
        |n| {
            let c = critic_loss(n, &pb, &actions, &y);
            c.q1 + c.q2
        },
        |n| !n.starts_with("actor"),
        1e-5,
        200,
        5,
    );
    let actor_grad = actor_loss(&net.live, &pb, 0.2).grad;
    let actor_err = grad_check(&net.live, &actor_grad, |n| actor_loss(n, &pb, 0.2).loss, |n| n.starts_with("actor"), 1e-5, 200, 6);

    // Padded batch against the per-transition loop.
    let c = critic_loss(&net.live, &pb, &actions, &y);
    let a = actor_loss(&net.live, &pb, 0.2);
    let (mut c1, mut c2, mut al) = (0.0, 0.0, 0.0);
    let mut masked_ok = true;
    for (i, t) in ts.iter().enumerate() {
        let out = net.live.forward_sample(&t.state.sample());
        c1 += (out.q1[t.action] - y[i]).powi(2);
        c2 += (out.q2[t.action] - y[i]).powi(2);
        let pi = masked_softmax(&out.logits, &t.state.mask);
        let (_, _, dz) = actor_objective(&out, &t.state.mask, 0.2);
        for (k, &p) in pi.iter().enumerate() {
            if t.state.mask[k] == f64::NEG_INFINITY {
                masked_ok &= p == 0.0 && dz[k] == 0.0;
            } else {
                al += p * (0.2 * p.ln() - out.q1[k].min(out.q2[k]));
            }
        }
    }
    let b = ts.len() as f64;
    let padded_err = [(c.q1 - c1 / b).abs(), (c.q2 - c2 / b).abs(), (a.loss - al / b).abs()].into_iter().fold(0.0, f64::max);

    // Padded rows of the input gradient.
    let s = pb.samples.iter().find(|s| s.len < pb.max_len()).expect("a padded sample");
    let (out, cache) = net.live.forward_cached(s);
    let dq: Vec<f64> = (0..out.q1.len()).map(|i| if i < s.len { 1.0 } else { 0.0 }).collect();
    let mut g = net.live.zeros_like();
    let dx = net.live.backward_critic(&cache, &dq, &dq, &mut g);
    let padded_zero = (s.len..pb.max_len()).all(|r| dx.row(r).iter().all(|&v| v == 0.0));

    // Candidate permutations on a generated state.
    let scenario = generate_scenario(&GeneratorConfig::default(), 17).expect("scenario generation");
    let view = build_state(&scenario, &CoalitionStructure::empty(&scenario, 2000.0), 0);
    let big = PolicyNetwork::new(NetConfig::default(), 18);
    let base = big.forward(&view);
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut equi_err: f64 = 0.0;
    for _ in 0..10 {
        let mut perm: Vec<usize> = (0..view.len()).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let out = big.forward(&view.permuted(&perm));
        for (i, &p) in perm.iter().enumerate() {
            equi_err = equi_err
                .max((out.logits[i] - base.logits[p]).abs())
                .max((out.q1[i] - base.q1[p]).abs())
                .max((out.q2[i] - base.q2[p]).abs());
        }
    }

    let passed = critic_err < 1e-4 && actor_err < 1e-4 && padded_err < 1e-6 && masked_ok && padded_zero && equi_err <= 1e-12;
    Outcome::new(
        passed,
        format!(
            "grad rel err critic {critic_err:.2e} actor {actor_err:.2e}; padded vs loop {padded_err:.2e}; masked zero {masked_ok}; padded rows zero {padded_zero}; equivariance {equi_err:.2e}"
        ),
    )
}

fn eval_costs(policies: Vec<Policy>) -> ocf_harness::bench::BenchReport {
    let cfg = BenchConfig {
        scales: vec![Scale::new(4, 10), Scale::new(8, 20)],
        policies,
        runs: 100,
        base_seed: EVAL_SEED,
        engine: EngineConfig::default(),
        workers: None,
    };
    monte_carlo(&cfg).expect("scenario generation")
}

fn policy_quality(net: &PolicyNetwork, train_wall: f64, seed: u64) -> Outcome {
    let learned = |net: &PolicyNetwork, mode| Policy::Learned { net: Arc::new(net.clone()), mode };
    let report = eval_costs(vec![Policy::Random, Policy::Heuristic, learned(net, SelectMode::Argmax)]);
    let tsac = report.costs("4/10", "tsac");
    let random = report.costs("4/10", "random");
    let test = sign_test(&tsac, &random, 1e-9);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut detail = format!(
        "trained {:.0} s; 4/10 mean J tsac {:.3} random {:.3}; sign test {}-{}-{} p = {:.2e}",
        train_wall,
        mean(&tsac),
        mean(&random),
        test.wins,
        test.losses,
        test.ties,
        test.p_value
    );
    for scale in ["4/10", "8/20"] {
        let d = mean(&report.costs(scale, "tsac")) - mean(&report.costs(scale, "heuristic"));
        detail.push_str(&format!("; {scale} tsac - heuristic {d:+.3}"));
    }
    // Not gated: sampling mode, and the same architecture before training.
    let untrained = PolicyNetwork::new(net.config(), seed);
    for (label, policy) in [("sampled", learned(net, SelectMode::Sample)), ("untrained argmax", learned(&untrained, SelectMode::Argmax))] {
        let costs = eval_costs(vec![policy]).costs("4/10", "tsac");
        let t = sign_test(&costs, &random, 1e-9);
        detail.push_str(&format!("; {label}: mean {:.3}, {}-{} p = {:.2e}", mean(&costs), t.wins, t.losses, t.p_value));
    }
    Outcome::new(train_wall <= 1800.0 && mean(&tsac) < mean(&random) && test.p_value < 0.05, detail)
}

fn overlap_realization() -> Outcome {
    let mut checked = 0;
    let mut realized = 0;
    let mut misses = Vec::new();
    let generator = GeneratorConfig::scale(4, 10);
    let mut seed = 0u64;
    while checked < 50 {
        let s = generate_scenario(&generator, seed).expect("scenario generation");
        let heavy: Vec<usize> = (0..s.tasks.len()).filter(|&m| DemandClass::of(&s, m) == DemandClass::Heavy).collect();
        if !heavy.is_empty() {
            checked += 1;
            let t = simulate(&s, &Policy::Heuristic, &EngineConfig::with_seed(seed));
            if heavy.iter().any(|&m| t.structure.allocations()[m].coalition_size() >= 2) {
                realized += 1;
            } else {
                misses.push(seed);
            }
        }
        seed += 1;
    }
    Outcome::new(realized == checked, format!("{realized}/{checked} scenarios with a heavy task served by 2+ agents; misses {misses:?}"))
}

fn complexity_scaling() -> Outcome {
    let r = scaling(&[10, 20, 40, 80], 4, 0, &EngineConfig::default()).expect("scenario generation");
    let points: Vec<String> = r.points.iter().map(|p| format!("M={} {:.2e} s", p.tasks, p.mean_wall_per_decision_s)).collect();
    Outcome::new(r.slope <= SLOPE_BOUND, format!("slope {:.3} (bound {SLOPE_BOUND}); {}", r.slope, points.join(", ")))
}

fn bench_csv(cfg: &BenchConfig) -> (Vec<u8>, Vec<u8>) {
    let report = monte_carlo(cfg).expect("scenario generation");
    let (mut runs, mut summary) = (Vec::new(), Vec::new());
    export::write_bench_runs(&mut runs, &report).expect("csv");
    export::write_bench_summary(&mut summary, &report).expect("csv");
    (runs, summary)
}

fn determinism_and_formats(net: &PolicyNetwork) -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut problems = Vec::new();

    for seed in 0..20 {
        let s = generate_scenario(&GeneratorConfig::scale(8, 20), seed).expect("scenario generation");
        let path = dir.path().join("scenario.json");
        std::fs::write(&path, s.to_json()).expect("write");
        let text = std::fs::read_to_string(&path).expect("read");
        let back = Scenario::from_json(&text).expect("parse");
        if back != s || back.to_json() != text {
            problems.push(format!("scenario {seed} round trip"));
        }
    }

    let path = dir.path().join("net.ckpt");
    save_checkpoint(net, &path).expect("save");
    let first = std::fs::read(&path).expect("read");
    let back = load_checkpoint(&path).expect("load");
    save_checkpoint(&back, &path).expect("save");
    if back != *net || std::fs::read(&path).expect("read") != first {
        problems.push("checkpoint round trip".into());
    }

    let cfg = BenchConfig {
        scales: vec![Scale::new(4, 10), Scale::new(8, 20)],
        policies: vec![Policy::Random, Policy::Heuristic, Policy::Learned { net: Arc::new(back), mode: SelectMode::Sample }],
        runs: 20,
        base_seed: 7,
        engine: EngineConfig::default(),
        workers: None,
    };
    let a = bench_csv(&cfg);
    let b = bench_csv(&BenchConfig { workers: Some(1), ..cfg });
    if a != b {
        problems.push("bench CSVs differ between identical runs".into());
    }
    Outcome::new(
        problems.is_empty(),
        if problems.is_empty() {
            format!("20 scenarios, checkpoint ({} bytes), bench CSVs ({} + {} bytes) reproduced", first.len(), a.0.len(), a.1.len())
        } else {
            problems.join(", ")
        },
    )
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored.
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n} {name} ... {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "small-scale reproduction", small_scale_reproduction());
    report(2, "potential-game invariants", potential_game_invariants());
    report(3, "finite convergence", finite_convergence());
    report(4, "neural verification", neural_verification());

    let train_cfg = training_config();
    let started = Instant::now();
    let trained = train(&train_cfg, &mut |_| {});
    let train_wall = started.elapsed().as_secs_f64();
    let net = match trained {
        Ok(r) => Some(r.net),
        Err(e) => {
            report(5, "policy quality", Outcome::new(false, format!("training failed: {e}")));
            None
        }
    };
    if let Some(net) = &net {
        report(5, "policy quality", policy_quality(net, train_wall, train_cfg.seed));
    }
    report(6, "overlap realization", overlap_realization());
    report(7, "complexity scaling", complexity_scaling());
    let fallback = PolicyNetwork::new(NetConfig::default(), 0);
    report(8, "determinism and formats", determinism_and_formats(net.as_ref().unwrap_or(&fallback)));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!("\nacceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}

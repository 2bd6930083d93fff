use std::collections::BTreeMap;
use std::time::Instant;

use ocf_core::game::{is_nash_stable, EngineConfig, Termination};
use ocf_core::policy::Policy;
use ocf_core::scenario::{generate_scenario, GeneratorConfig, ScenarioError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::sim::simulate;

/// Fleet and task counts of one benchmark scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scale {
    pub agents: usize,
    pub tasks: usize,
}

impl Scale {
    pub const fn new(agents: usize, tasks: usize) -> Self {
        Self { agents, tasks }
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.agents, self.tasks)
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig::scale(self.agents, self.tasks)
    }
}

impl std::str::FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, t) = s.split_once('/').ok_or_else(|| format!("scale '{s}' is not of the form N/M"))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("scale '{s}': {e}"));
        Ok(Self::new(parse(a)?, parse(t)?))
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub scales: Vec<Scale>,
    pub policies: Vec<Policy>,
    pub runs: usize,
    pub base_seed: u64,
    pub engine: EngineConfig,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

/// Outcome of one (scale, policy, run) simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scale: String,
    pub policy: String,
    pub run: usize,
    pub seed: u64,
    pub final_cost: f64,
    pub decisions: usize,
    pub accepted: usize,
    pub quiescent: bool,
    pub stable: bool,
    #[serde(skip)]
    pub wall_s: f64,
    #[serde(skip)]
    pub events: usize,
}

/// Aggregate over the runs of one (scale, policy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scale: String,
    pub policy: String,
    pub runs: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub outliers: usize,
    pub stability_rate: f64,
}

/// Wall-clock figures, kept apart from the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub scale: String,
    pub policy: String,
    pub runs: usize,
    pub mean_wall_per_solve_s: f64,
    pub max_wall_per_run_s: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub runs: Vec<RunRecord>,
    pub rows: Vec<BenchRow>,
    pub timing: Vec<TimingRow>,
}

impl BenchReport {
    /// Final costs of `policy` at `scale`, in run order.
    pub fn costs(&self, scale: &str, policy: &str) -> Vec<f64> {
        let mut v: Vec<&RunRecord> = self.runs.iter().filter(|r| r.scale == scale && r.policy == policy).collect();
        v.sort_by_key(|r| r.run);
        v.iter().map(|r| r.final_cost).collect()
    }

    pub fn row(&self, scale: &str, policy: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.scale == scale && r.policy == policy)
    }
}

/// Paired Monte Carlo: run `r` of every policy at a scale uses the scenario
/// generated from seed `base_seed + r` and the same engine seed.
pub fn monte_carlo(cfg: &BenchConfig) -> Result<BenchReport, ScenarioError> {
    let mut jobs = Vec::new();
    for &scale in &cfg.scales {
        for run in 0..cfg.runs {
            let seed = cfg.base_seed.wrapping_add(run as u64);
            let scenario = generate_scenario(&scale.generator(), seed)?;
            for policy in &cfg.policies {
                jobs.push((scale, run, seed, scenario.clone(), policy.clone()));
            }
        }
    }
    let work = || {
        jobs.par_iter()
            .map(|(scale, run, seed, scenario, policy)| {
                let engine = EngineConfig { seed: *seed, ..cfg.engine.clone() };
                let started = Instant::now();
                let t = simulate(scenario, policy, &engine);
                let wall_s = started.elapsed().as_secs_f64();
                RunRecord {
                    scale: scale.label(),
                    policy: policy.name().to_string(),
                    run: *run,
                    seed: *seed,
                    final_cost: t.final_cost(),
                    decisions: t.decisions(),
                    accepted: t.accepted(),
                    quiescent: t.events.iter().all(|e| e.termination == Termination::Quiescent),
                    stable: is_nash_stable(&t.structure, scenario).stable,
                    wall_s,
                    events: t.events.len(),
                }
            })
            .collect::<Vec<_>>()
    };
    let runs = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    };
    Ok(summarize(runs, cfg))
}

fn summarize(runs: Vec<RunRecord>, cfg: &BenchConfig) -> BenchReport {
    let mut groups: BTreeMap<(usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    let scale_labels: Vec<String> = cfg.scales.iter().map(Scale::label).collect();
    let policy_names: Vec<&str> = cfg.policies.iter().map(Policy::name).collect();
    for r in &runs {
        let s = scale_labels.iter().position(|l| *l == r.scale).expect("known scale");
        let p = policy_names.iter().position(|n| *n == r.policy).expect("known policy");
        groups.entry((s, p)).or_default().push(r);
    }
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for ((s, p), group) in &groups {
        let costs: Vec<f64> = group.iter().map(|r| r.final_cost).collect();
        let stats = Summary::of(&costs);
        let n = group.len();
        rows.push(BenchRow {
            scale: scale_labels[*s].clone(),
            policy: policy_names[*p].to_string(),
            runs: n,
            mean: stats.mean,
            median: stats.median,
            q1: stats.q1,
            q3: stats.q3,
            iqr: stats.q3 - stats.q1,
            outliers: stats.outliers,
            stability_rate: group.iter().filter(|r| r.stable).count() as f64 / n as f64,
        });
        let solves: usize = group.iter().map(|r| r.events).sum();
        timing.push(TimingRow {
            scale: scale_labels[*s].clone(),
            policy: policy_names[*p].to_string(),
            runs: n,
            mean_wall_per_solve_s: group.iter().map(|r| r.wall_s).sum::<f64>() / solves.max(1) as f64,
            max_wall_per_run_s: group.iter().map(|r| r.wall_s).fold(0.0, f64::max),
        });
    }
    let mut runs = runs;
    runs.sort_by(|a, b| {
        let key = |r: &RunRecord| {
            (
                scale_labels.iter().position(|l| *l == r.scale),
                r.run,
                policy_names.iter().position(|n| *n == r.policy),
            )
        };
        key(a).cmp(&key(b))
    });
    BenchReport { runs, rows, timing }
}

/// Location and spread of a sample, with Tukey outliers beyond 1.5 IQR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub outliers: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of an empty sample");
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
        let iqr = q3 - q1;
        let outliers = v.iter().filter(|&&x| x < q1 - 1.5 * iqr || x > q3 + 1.5 * iqr).count();
        Self { mean: v.iter().sum::<f64>() / v.len() as f64, median, q1, q3, outliers }
    }
}

/// One-sided paired sign test of `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
    pub p_value: f64,
}

pub fn sign_test(a: &[f64], b: &[f64], tie_tol: f64) -> SignTest {
    assert_eq!(a.len(), b.len(), "sign test needs paired samples");
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() <= tie_tol {
            ties += 1;
        } else if x < y {
            wins += 1;
        } else {
            losses += 1;
        }
    }
    let n = (wins + losses) as u64;
    let p_value = if n == 0 || wins == 0 {
        1.0
    } else {
        let bin = Binomial::new(0.5, n).expect("valid binomial");
        bin.sf(wins as u64 - 1)
    };
    SignTest { wins, losses, ties, p_value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_small_sample() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0, 100.0]);
        assert_eq!(s.median, 3.0);
        assert_eq!(s.q1, 2.0);
        assert_eq!(s.q3, 4.0);
        assert_eq!(s.outliers, 1);
        assert_eq!(s.mean, 22.0);
    }

    #[test]
    fn sign_test_tail() {
        // 9 wins of 10: P(X >= 9) = 11/1024.
        let a = [0.0; 10];
        let mut b = [1.0; 10];
        b[0] = -1.0;
        let t = sign_test(&a, &b, 0.0);
        assert_eq!((t.wins, t.losses, t.ties), (9, 1, 0));
        assert!((t.p_value - 11.0 / 1024.0).abs() < 1e-12);
        let even = sign_test(&[1.0, 2.0], &[2.0, 1.0], 0.0);
        assert!((even.p_value - 0.75).abs() < 1e-12);
        assert_eq!(sign_test(&[1.0], &[1.0], 1e-9).p_value, 1.0);
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("8/20".parse::<Scale>().unwrap(), Scale::new(8, 20));
        assert!("8x20".parse::<Scale>().is_err());
        assert_eq!(Scale::new(32, 80).label(), "32/80");
    }
}

use std::fmt;

use ocf_core::game::{is_nash_stable, AcceptRule, CoalitionStructure, EngineConfig, Termination, EPS_STRICT};
use ocf_core::policy::Policy;
use ocf_core::scenario::{generate_scenario, GeneratorConfig, ScenarioError};
use serde::{Deserialize, Serialize};

use crate::bench::Scale;
use crate::sim::simulate_observed;

pub const IDENTITY_TOL: f64 = 1e-9;
pub const SLOPE_BOUND: f64 = 2.3;

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub scale: Scale,
    pub policies: Vec<Policy>,
    /// Engine seeds per (scenario, policy).
    pub repeats: usize,
    pub engine: EngineConfig,
    /// Task counts of the wall-time scaling fit; empty skips the fit.
    pub scaling_tasks: Vec<usize>,
    pub scaling_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            seed: 0,
            scale: Scale::new(4, 10),
            policies: vec![Policy::Random, Policy::Heuristic],
            repeats: 1,
            engine: EngineConfig::default(),
            scaling_tasks: vec![10, 20, 40, 80],
            scaling_samples: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// An accepted move did not lower `J` by more than the strictness slack.
    Descent,
    /// Full-recompute potential change differs from the cost change.
    Potential,
    /// Incrementally maintained cost differs from full recomputation.
    Incremental,
    /// A quiescent solve ended with an improving unilateral deviation.
    Stability,
}

/// A failed check with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: Check,
    pub scenario_seed: u64,
    pub generator: GeneratorConfig,
    pub engine: EngineConfig,
    pub policy: String,
    pub time: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub agents: usize,
    pub tasks: usize,
    pub decisions: usize,
    pub mean_wall_per_decision_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of log wall time per decision against log M.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scenarios: usize,
    pub solves: usize,
    pub accepted_moves: usize,
    pub quiescent_solves: usize,
    pub stable_quiescent_solves: usize,
    pub budget_exhausted_solves: usize,
    pub violations: Vec<Violation>,
    pub scaling: Option<ScalingReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.scaling.as_ref().is_none_or(|s| s.slope <= SLOPE_BOUND)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenarios: {}", self.scenarios)?;
        writeln!(f, "solves: {} ({} quiescent, {} stable, {} budget-exhausted)", self.solves, self.quiescent_solves, self.stable_quiescent_solves, self.budget_exhausted_solves)?;
        writeln!(f, "accepted moves: {}", self.accepted_moves)?;
        writeln!(f, "violations: {}", self.violations.len())?;
        for v in self.violations.iter().take(10) {
            writeln!(f, "  {:?} seed {} policy {} t={}: {}", v.check, v.scenario_seed, v.policy, v.time, v.detail)?;
        }
        if let Some(s) = &self.scaling {
            for p in &s.points {
                writeln!(f, "  {}/{}: {:.3e} s per decision over {} decisions", p.agents, p.tasks, p.mean_wall_per_decision_s, p.decisions)?;
            }
            writeln!(f, "log-log slope: {:.3} (bound {SLOPE_BOUND})", s.slope)?;
        }
        write!(f, "result: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Runs the invariant suite on `samples` generated scenarios.
pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport, ScenarioError> {
    let generator = cfg.scale.generator();
    let mut report = VerifyReport {
        scenarios: cfg.samples,
        solves: 0,
        accepted_moves: 0,
        quiescent_solves: 0,
        stable_quiescent_solves: 0,
        budget_exhausted_solves: 0,
        violations: Vec::new(),
        scaling: None,
    };
    for i in 0..cfg.samples {
        let scenario_seed = cfg.seed.wrapping_add(i as u64);
        let scenario = generate_scenario(&generator, scenario_seed)?;
        for policy in &cfg.policies {
            for rep in 0..cfg.repeats.max(1) {
                let engine = EngineConfig { seed: scenario_seed.wrapping_mul(31).wrapping_add(rep as u64), ..cfg.engine.clone() };
                let violation = |check, time, detail: String| Violation {
                    check,
                    scenario_seed,
                    generator: generator.clone(),
                    engine: engine.clone(),
                    policy: policy.name().to_string(),
                    time,
                    detail,
                };
                let mut found = Vec::new();
                let mut accepted = 0;
                let mut ends: Vec<CoalitionStructure> = Vec::new();
                let timeline = simulate_observed(&scenario, policy, &engine, &mut |obs| {
                    let t = obs.after.t_now();
                    match ends.last_mut() {
                        Some(last) if last.t_now() == t => *last = obs.after.clone(),
                        _ => ends.push(obs.after.clone()),
                    }
                    if !obs.record.accepted {
                        return;
                    }
                    accepted += 1;
                    let dj = obs.after.cost() - obs.before.cost();
                    if dj >= -EPS_STRICT {
                        found.push(violation(Check::Descent, t, format!("accepted {:?} with delta J {dj:e}", obs.record.op)));
                    }
                    let (full_before, full_after) = (obs.before.breakdown(&scenario), obs.after.breakdown(&scenario));
                    let dphi = full_after.potential - full_before.potential;
                    if (dphi - dj).abs() > IDENTITY_TOL {
                        found.push(violation(Check::Potential, t, format!("delta Phi {dphi:e} vs delta J {dj:e}")));
                    }
                    if (full_after.total - obs.after.cost()).abs() > IDENTITY_TOL {
                        found.push(violation(
                            Check::Incremental,
                            t,
                            format!("incremental {} vs full {}", obs.after.cost(), full_after.total),
                        ));
                    }
                });
                for (event, end) in timeline.events.iter().zip(&ends) {
                    report.solves += 1;
                    match event.termination {
                        Termination::Quiescent => {
                            report.quiescent_solves += 1;
                            let st = is_nash_stable(end, &scenario);
                            if st.stable {
                                report.stable_quiescent_solves += 1;
                            } else {
                                found.push(violation(
                                    Check::Stability,
                                    event.time,
                                    format!("{} improving deviations, witness {:?}", st.improving, st.witness),
                                ));
                            }
                        }
                        Termination::IterationLimit => report.budget_exhausted_solves += 1,
                    }
                }
                report.accepted_moves += accepted;
                report.violations.extend(found);
            }
        }
    }
    if !cfg.scaling_tasks.is_empty() {
        report.scaling = Some(scaling(&cfg.scaling_tasks, cfg.scaling_samples, cfg.seed, &cfg.engine)?);
    }
    Ok(report)
}

/// Mean wall time per engine decision at fleet size `2M/5` for each `M`,
/// under the heuristic policy, with the log-log least-squares slope.
pub fn scaling(tasks: &[usize], samples: usize, seed: u64, engine: &EngineConfig) -> Result<ScalingReport, ScenarioError> {
    let mut points = Vec::new();
    for &m in tasks {
        let scale = Scale::new((2 * m / 5).max(1), m);
        let (mut wall, mut decisions) = (0.0, 0usize);
        for i in 0..samples.max(1) {
            let s = generate_scenario(&scale.generator(), seed.wrapping_add(i as u64))?;
            let t = simulate_observed(&s, &Policy::Heuristic, &EngineConfig { seed: i as u64, ..engine.clone() }, &mut |_| {});
            wall += t.events.iter().map(|e| e.wall_s).sum::<f64>();
            decisions += t.decisions();
        }
        points.push(ScalingPoint {
            agents: scale.agents,
            tasks: m,
            decisions,
            mean_wall_per_decision_s: wall / decisions.max(1) as f64,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.tasks as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_wall_per_decision_s.ln()).collect();
    Ok(ScalingReport { slope: least_squares_slope(&xs, &ys), points })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Same suite with the non-strict acceptance rule; used to check that the
/// descent check catches a weakened acceptance test.
pub fn verify_mutated(cfg: &VerifyConfig) -> Result<VerifyReport, ScenarioError> {
    let engine = EngineConfig { accept_rule: AcceptRule::NonStrict, ..cfg.engine.clone() };
    verify(&VerifyConfig { engine, scaling_tasks: Vec::new(), ..cfg.clone() })
}

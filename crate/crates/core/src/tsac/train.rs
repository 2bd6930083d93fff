use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{decision_seed, run_events, EngineConfig};
use crate::policy::{Policy, SelectMode};
use crate::scenario::{generate_scenario, GeneratorConfig, ScenarioError};

use super::loss::{actor_loss, critic_loss, padded_batch, target_values};
use super::net::NetConfig;
use super::optim::{clip_global_norm, Optimizer, OptimizerKind};
use super::replay::ReplayBuffer;
use super::{masked_softmax, reward, NetInput, PolicyNetwork, Transition};

/// Offset separating training scenario seeds from evaluation seeds.
pub const TRAIN_SEED_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub polyak: f64,
    pub grad_steps_per_env_step: usize,
    pub episodes: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub clip_norm: Option<f64>,
    pub net: NetConfig,
    pub generator: GeneratorConfig,
    pub engine: EngineConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.2,
            lr: 3e-4,
            batch_size: 64,
            replay_capacity: 50_000,
            polyak: 0.005,
            grad_steps_per_env_step: 1,
            episodes: 200,
            seed: 0,
            optimizer: OptimizerKind::default(),
            clip_norm: None,
            net: NetConfig::default(),
            generator: GeneratorConfig::default(),
            engine: EngineConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.alpha < 0.0 {
            return bad("alpha must be nonnegative");
        }
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return bad("polyak factor must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return bad("batch size and replay capacity must be positive");
        }
        self.net.validate().map_err(TrainError::Config)
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("training diverged at episode {episode}: {what} is not finite")]
    Diverged { episode: usize, what: &'static str },
}

/// One learning-curve row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub episode_return: f64,
    pub final_cost: f64,
    pub entropy: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub decisions: usize,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub net: PolicyNetwork,
    pub curve: Vec<CurvePoint>,
}

/// Discrete SAC over solver episodes. Each episode is a full event rollout on
/// a freshly generated scenario with the current actor sampling actions; the
/// episode's decisions enter the replay buffer, then one round of gradient
/// updates is run per recorded decision.
pub fn train(cfg: &TrainConfig, progress: &mut dyn FnMut(&CurvePoint)) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let mut net = PolicyNetwork::new(cfg.net, cfg.seed);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut critic_opt = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut actor_opt = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut curve = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let scenario_seed = TRAIN_SEED_OFFSET + cfg.seed.wrapping_mul(1_000_003) + episode as u64;
        let scenario = generate_scenario(&cfg.generator, scenario_seed)?;
        let policy = Policy::Learned { net: Arc::new(net.clone()), mode: SelectMode::Sample };
        let engine = EngineConfig { seed: decision_seed(cfg.seed, episode as u64), ..cfg.engine.clone() };

        let mut steps: Vec<(NetInput, usize, f64)> = Vec::new();
        let rollout = run_events(&scenario, &policy, &engine, &mut |obs| {
            if let (Some(view), Some(action)) = (obs.view, obs.action) {
                steps.push((NetInput::from(view), action, reward(&scenario, obs.before, obs.after)));
            }
        });

        let episode_return: f64 = steps.iter().map(|s| s.2).sum();
        let entropy = if steps.is_empty() {
            0.0
        } else {
            steps
                .iter()
                .map(|(s, _, _)| {
                    let p = masked_softmax(&net.live.forward_sample(&s.sample()).logits, &s.mask);
                    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
                })
                .sum::<f64>()
                / steps.len() as f64
        };
        let decisions = steps.len();
        for i in 0..steps.len() {
            let done = i + 1 == steps.len();
            let next = if done { steps[i].0.clone() } else { steps[i + 1].0.clone() };
            let (state, action, r) = steps[i].clone();
            replay.push(Transition { state, action, reward: r, next, done });
        }

        let (mut closs, mut aloss, mut updates) = (0.0, 0.0, 0usize);
        if replay.len() >= cfg.batch_size {
            for _ in 0..decisions * cfg.grad_steps_per_env_step {
                let batch = replay.sample(cfg.batch_size, &mut rng);
                let targets = target_values(&net.live, &net.target, &batch, cfg.gamma, cfg.alpha);
                let states: Vec<&NetInput> = batch.iter().map(|t| &t.state).collect();
                let pb = padded_batch(&states);
                let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();

                let mut c = critic_loss(&net.live, &pb, &actions, &targets);
                if !(c.q1.is_finite() && c.q2.is_finite()) {
                    return Err(TrainError::Diverged { episode, what: "critic loss" });
                }
                if let Some(max) = cfg.clip_norm {
                    clip_global_norm(&mut c.grad, max);
                }
                critic_opt.step(&mut net.live, &c.grad, |n| !n.starts_with("actor"));

                let mut a = actor_loss(&net.live, &pb, cfg.alpha);
                if !a.loss.is_finite() {
                    return Err(TrainError::Diverged { episode, what: "actor loss" });
                }
                if let Some(max) = cfg.clip_norm {
                    clip_global_norm(&mut a.grad, max);
                }
                actor_opt.step(&mut net.live, &a.grad, |n| n.starts_with("actor"));
                net.polyak_update(cfg.polyak);

                closs += c.q1 + c.q2;
                aloss += a.loss;
                updates += 1;
            }
        }
        let point = CurvePoint {
            episode,
            episode_return,
            final_cost: rollout.structure.cost(),
            entropy,
            critic_loss: if updates > 0 { closs / updates as f64 } else { 0.0 },
            actor_loss: if updates > 0 { aloss / updates as f64 } else { 0.0 },
            decisions,
        };
        progress(&point);
        curve.push(point);
    }
    Ok(TrainReport { net, curve })
}

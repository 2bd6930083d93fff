//! Set-attention actor-critic over variable-length candidate lists, trained
//! with discrete soft actor-critic. Gradients are derived by hand.

mod checkpoint;
mod loss;
mod net;
mod optim;
mod replay;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use loss::{
    actor_loss, actor_objective, critic_loss, forward_batch, grad_check, masked_mean, mean_entropy, padded_batch, target_values,
    ActorLoss, CriticLoss, PaddedBatch,
};
pub use net::{multi_head, EncoderLayer, Mat, Mlp, NetConfig, NetOutput, Network, Sample};
pub use optim::{clip_global_norm, Optimizer, OptimizerKind};
pub use replay::ReplayBuffer;
pub use train::{train, CurvePoint, TrainConfig, TrainError, TrainReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::CoalitionStructure;
use crate::policy::StateView;
use crate::scenario::Scenario;

/// Network-facing part of a [`StateView`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetInput {
    pub agent: Vec<f64>,
    pub candidates: Vec<Vec<f64>>,
    pub depot: Vec<bool>,
    pub mask: Vec<f64>,
}

impl NetInput {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn sample(&self) -> Sample {
        let f = self.candidates.first().map_or(0, |c| c.len());
        let rows: Vec<f64> = self.candidates.iter().flatten().copied().collect();
        Sample {
            agent: Mat::from_shape_vec((1, self.agent.len()), self.agent.clone()).expect("agent row"),
            candidates: Mat::from_shape_vec((self.len(), f), rows).expect("candidate rows"),
            depot: self.depot.clone(),
            len: self.len(),
        }
    }
}

impl From<&StateView> for NetInput {
    fn from(v: &StateView) -> Self {
        Self {
            agent: v.agent_features.to_vec(),
            candidates: v.candidates.iter().map(|c| c.features.to_vec()).collect(),
            depot: v.candidates.iter().map(|c| c.target.is_depot()).collect(),
            mask: v.mask(),
        }
    }
}

/// One replay record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: NetInput,
    pub action: usize,
    pub reward: f64,
    pub next: NetInput,
    pub done: bool,
}

/// Softmax of `logits + mask`; masked entries get probability exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[f64]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m != f64::NEG_INFINITY)
        .map(|(&z, &m)| z + m)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let e: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m == f64::NEG_INFINITY { 0.0 } else { (z + m - max).exp() })
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Normalized cost decrease of one decision.
pub fn reward(scenario: &Scenario, before: &CoalitionStructure, after: &CoalitionStructure) -> f64 {
    (before.cost() - after.cost()) / (scenario.weights.load + scenario.weights.time)
}

/// Live network plus the target copy used for bootstrapped critic values.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    pub live: Network,
    pub target: Network,
}

impl PolicyNetwork {
    pub fn new(config: NetConfig, seed: u64) -> Self {
        config.validate().expect("valid network configuration");
        let live = Network::new(config, &mut ChaCha8Rng::seed_from_u64(seed));
        Self { target: live.clone(), live }
    }

    pub fn config(&self) -> NetConfig {
        self.live.config
    }

    pub fn forward(&self, view: &StateView) -> NetOutput {
        self.live.forward_sample(&NetInput::from(view).sample())
    }

    /// `target <- tau * live + (1 - tau) * target` on encoder and critic heads.
    pub fn polyak_update(&mut self, tau: f64) {
        let live = self.live.params();
        for ((name, t), (_, l)) in self.target.params_mut().into_iter().zip(live) {
            if name.starts_with("actor") {
                continue;
            }
            t.zip_mut_with(l, |t, &l| *t = tau * l + (1.0 - tau) * *t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_softmax_example() {
        let p = masked_softmax(&[2.0, 1.0, 0.0], &[0.0, f64::NEG_INFINITY, 0.0]);
        let e2 = 2f64.exp();
        assert!((p[0] - e2 / (e2 + 1.0)).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
        assert!((p[2] - 1.0 / (e2 + 1.0)).abs() < 1e-15);
        assert!((p[0] - 0.8808).abs() < 1e-4 && (p[2] - 0.1192).abs() < 1e-4);
    }

    #[test]
    fn masked_softmax_degenerate_cases() {
        assert_eq!(masked_softmax(&[0.0, 0.0], &[0.0, f64::NEG_INFINITY]), vec![1.0, 0.0]);
        assert_eq!(masked_softmax(&[-50.0, 9.0, 3.0], &[0.0, f64::NEG_INFINITY, f64::NEG_INFINITY]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn polyak_one_copies_live_critics() {
        let mut net = PolicyNetwork::new(NetConfig { d_model: 8, heads: 2, layers: 1, hidden: 8, ..NetConfig::default() }, 1);
        for (_, p) in net.live.params_mut() {
            p.mapv_inplace(|v| v + 0.25);
        }
        net.polyak_update(1.0);
        assert_eq!(net.target.critic1, net.live.critic1);
        assert_eq!(net.target.layers, net.live.layers);
        assert_ne!(net.target.actor, net.live.actor);
    }
}

use serde::{Deserialize, Serialize};

use super::net::{Mat, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::SgdMomentum { momentum: 0.9 }
    }
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First-order optimizer over the parameters whose names pass a filter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    first: Vec<Option<Mat>>,
    second: Vec<Option<Mat>>,
    steps: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self { kind, lr, first: Vec::new(), second: Vec::new(), steps: 0 }
    }

    pub fn step(&mut self, net: &mut Network, grad: &Network, include: impl Fn(&str) -> bool) {
        self.steps += 1;
        let grads = grad.params();
        let params = net.params_mut();
        if self.first.is_empty() {
            self.first = vec![None; params.len()];
            self.second = vec![None; params.len()];
        }
        for (i, ((name, p), (_, g))) in params.into_iter().zip(grads).enumerate() {
            if !include(&name) {
                continue;
            }
            let m = self.first[i].get_or_insert_with(|| Mat::zeros(g.raw_dim()));
            match self.kind {
                OptimizerKind::SgdMomentum { momentum } => {
                    m.zip_mut_with(g, |m, &g| *m = momentum * *m + g);
                    p.scaled_add(-self.lr, m);
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    m.zip_mut_with(g, |m, &g| *m = beta1 * *m + (1.0 - beta1) * g);
                    let v = self.second[i].get_or_insert_with(|| Mat::zeros(g.raw_dim()));
                    v.zip_mut_with(g, |v, &g| *v = beta2 * *v + (1.0 - beta2) * g * g);
                    let c1 = 1.0 - beta1.powi(self.steps);
                    let c2 = 1.0 - beta2.powi(self.steps);
                    let lr = self.lr;
                    ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                        *p -= lr * (m / c1) / ((v / c2).sqrt() + eps);
                    });
                }
            }
        }
    }
}

/// Rescales `grad` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grad: &mut Network, max_norm: f64) -> f64 {
    let norm = grad.params().iter().map(|(_, g)| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for (_, g) in grad.params_mut() {
            g.mapv_inplace(|x| x * s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsac::NetConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Network {
        Network::new(NetConfig { d_model: 4, heads: 2, layers: 1, hidden: 4, ..NetConfig::default() }, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn sgd_momentum_accumulates_velocity() {
        let mut net = tiny();
        let before = net.actor.b2[[0, 0]];
        let mut g = net.zeros_like();
        g.actor.b2[[0, 0]] = 1.0;
        let mut opt = Optimizer::new(OptimizerKind::default(), 0.1);
        opt.step(&mut net, &g, |_| true);
        opt.step(&mut net, &g, |_| true);
        // v1 = 1, v2 = 1.9
        assert!((net.actor.b2[[0, 0]] - (before - 0.1 - 0.19)).abs() < 1e-12);
    }

    #[test]
    fn filter_leaves_other_params_untouched() {
        let mut net = tiny();
        let snapshot = net.clone();
        let mut g = net.zeros_like();
        for (_, p) in g.params_mut() {
            p.fill(1.0);
        }
        Optimizer::new(OptimizerKind::adam(), 0.01).step(&mut net, &g, |n| n.starts_with("actor"));
        assert_eq!(net.critic1, snapshot.critic1);
        assert_ne!(net.actor, snapshot.actor);
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let net = tiny();
        let mut g = net.zeros_like();
        for (_, p) in g.params_mut() {
            p.fill(3.0);
        }
        let before = clip_global_norm(&mut g, 1.0);
        assert!(before > 1.0);
        let after = clip_global_norm(&mut g, 1.0);
        assert!((after - 1.0).abs() < 1e-9);
    }
}

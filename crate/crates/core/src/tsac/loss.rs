use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{ForwardCache, Mat, NetOutput, Network, Sample};
use super::{masked_softmax, NetInput, Transition};

/// Transitions padded to a common candidate count `L_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub samples: Vec<Sample>,
    /// Action masks `{0, -inf}`; padded positions are `-inf`.
    pub masks: Mat,
    /// `P_mask[i][j] = 1` iff position `j` is a real candidate of entry `i`.
    pub pmask: Mat,
    pub lengths: Vec<usize>,
}

impl PaddedBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.masks.ncols()
    }

    pub fn mask_row(&self, i: usize) -> Vec<f64> {
        self.masks.row(i).to_vec()
    }
}

pub fn padded_batch(inputs: &[&NetInput]) -> PaddedBatch {
    assert!(!inputs.is_empty(), "batch must not be empty");
    let l_max = inputs.iter().map(|x| x.len()).max().unwrap_or(0);
    let b = inputs.len();
    let mut masks = Mat::from_elem((b, l_max), f64::NEG_INFINITY);
    let mut pmask = Mat::zeros((b, l_max));
    let mut samples = Vec::with_capacity(b);
    for (i, x) in inputs.iter().enumerate() {
        let f = x.candidates.first().map_or(0, |c| c.len());
        let mut cand = Mat::zeros((l_max, f));
        let mut depot = vec![false; l_max];
        for (j, row) in x.candidates.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                cand[[j, c]] = v;
            }
            depot[j] = x.depot[j];
            masks[[i, j]] = x.mask[j];
            pmask[[i, j]] = 1.0;
        }
        let agent = Mat::from_shape_vec((1, x.agent.len()), x.agent.clone()).expect("agent row");
        samples.push(Sample { agent, candidates: cand, depot, len: x.len() });
    }
    PaddedBatch { samples, masks, pmask, lengths: inputs.iter().map(|x| x.len()).collect() }
}

/// `sum(P * values) / sum(P)`: the mean over valid positions only.
pub fn masked_mean(values: &Mat, pmask: &Mat) -> f64 {
    let total: f64 = values.iter().zip(pmask.iter()).filter(|(_, &p)| p != 0.0).map(|(v, p)| v * p).sum();
    total / pmask.sum()
}

/// Per-state entropy of the masked policy, reduced over the batch.
pub fn mean_entropy(net: &Network, batch: &PaddedBatch) -> f64 {
    let mut h = 0.0;
    for (i, s) in batch.samples.iter().enumerate() {
        let out = net.forward_sample(s);
        let p = masked_softmax(&out.logits, &batch.mask_row(i));
        h -= p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
    }
    h / batch.len() as f64
}

/// Soft Bellman targets
/// `y = r + gamma (1 - done) sum_a' pi(a'|s') (min_j Qbar_j(s', a') - alpha log pi(a'|s'))`,
/// with `pi` from the live actor and `Qbar` from the target critics.
pub fn target_values(live: &Network, target: &Network, batch: &[&Transition], gamma: f64, alpha: f64) -> Vec<f64> {
    let next: Vec<&NetInput> = batch.iter().map(|t| &t.next).collect();
    let pb = padded_batch(&next);
    batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.done || gamma == 0.0 {
                return t.reward;
            }
            let pi = masked_softmax(&live.forward_sample(&pb.samples[i]).logits, &pb.mask_row(i));
            let tq = target.forward_sample(&pb.samples[i]);
            let v: f64 = pi
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| p * (tq.q1[a].min(tq.q2[a]) - alpha * p.ln()))
                .sum();
            t.reward + gamma * v
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticLoss {
    pub q1: f64,
    pub q2: f64,
    pub grad: Network,
}

/// `J_Q(theta_j) = mean_i (Q_j(s_i, a_i) - y_i)^2` for both critics, with
/// the gradient of their sum w.r.t. encoder and critic heads.
pub fn critic_loss(net: &Network, batch: &PaddedBatch, actions: &[usize], targets: &[f64]) -> CriticLoss {
    let b = batch.len() as f64;
    let mut grad = net.zeros_like();
    let (mut l1, mut l2) = (0.0, 0.0);
    for (i, s) in batch.samples.iter().enumerate() {
        let (out, cache) = net.forward_cached(s);
        let a = actions[i];
        let (e1, e2) = (out.q1[a] - targets[i], out.q2[a] - targets[i]);
        l1 += e1 * e1 / b;
        l2 += e2 * e2 / b;
        let mut dq1 = vec![0.0; out.q1.len()];
        let mut dq2 = vec![0.0; out.q2.len()];
        dq1[a] = 2.0 * e1 / b;
        dq2[a] = 2.0 * e2 / b;
        net.backward_critic(&cache, &dq1, &dq2, &mut grad);
    }
    CriticLoss { q1: l1, q2: l2, grad }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    pub entropy: f64,
    pub grad: Network,
}

/// Per-state actor objective, policy entropy and gradient w.r.t. the logits.
pub fn actor_objective(out: &NetOutput, mask: &[f64], alpha: f64) -> (f64, f64, Vec<f64>) {
    let pi = masked_softmax(&out.logits, mask);
    let f: Vec<f64> = pi
        .iter()
        .enumerate()
        .map(|(a, &p)| if p > 0.0 { alpha * p.ln() - out.q1[a].min(out.q2[a]) } else { 0.0 })
        .collect();
    let loss: f64 = pi.iter().zip(&f).map(|(p, f)| p * f).sum();
    let entropy = -pi.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
    // d/dz_b sum_a pi_a f_a = pi_b (f_b - sum_a pi_a f_a); masked entries have pi = 0.
    let dz = pi.iter().zip(&f).map(|(p, fb)| p * (fb - loss)).collect();
    (loss, entropy, dz)
}

/// `J_pi = mean_s sum_a pi(a|s) (alpha log pi(a|s) - min_j Q_j(s, a))` over
/// unmasked actions, differentiated w.r.t. the actor head only.
pub fn actor_loss(net: &Network, batch: &PaddedBatch, alpha: f64) -> ActorLoss {
    let b = batch.len() as f64;
    let mut grad = net.zeros_like();
    let (mut loss, mut entropy) = (0.0, 0.0);
    for (i, s) in batch.samples.iter().enumerate() {
        let (out, cache) = net.forward_cached(s);
        let (l, h, dz) = actor_objective(&out, &batch.mask_row(i), alpha);
        loss += l / b;
        entropy += h / b;
        let dz: Vec<f64> = dz.iter().map(|d| d / b).collect();
        net.backward_actor(&cache, &dz, &mut grad);
    }
    ActorLoss { loss, entropy, grad }
}

/// Forward pass kept for callers that need both outputs and caches.
pub fn forward_batch(net: &Network, batch: &PaddedBatch) -> Vec<(NetOutput, ForwardCache)> {
    batch.samples.iter().map(|s| net.forward_cached(s)).collect()
}

/// Maximum relative error `|a - n| / max(|a|, |n|, 1e-6)` between analytic
/// gradients and central differences over `samples` random parameters drawn
/// from the tensors whose names pass `include`.
pub fn grad_check(
    net: &Network,
    analytic: &Network,
    loss: impl Fn(&Network) -> f64,
    include: impl Fn(&str) -> bool,
    h: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let sizes: Vec<usize> = net.params().iter().map(|(n, p)| if include(n) { p.len() } else { 0 }).collect();
    let total: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, total, samples.min(total));
    let grads: Vec<Vec<f64>> = analytic.params().iter().map(|(_, p)| p.iter().copied().collect()).collect();
    let mut worst: f64 = 0.0;
    for flat in picks.iter() {
        let (mut t, mut off) = (0, flat);
        while off >= sizes[t] {
            off -= sizes[t];
            t += 1;
        }
        let mut probe = net.clone();
        let eval = |probe: &mut Network, v: f64| {
            let mut ps = probe.params_mut();
            let p = ps[t].1.as_slice_mut().expect("contiguous parameter");
            p[off] = v;
            drop(ps);
            loss(probe)
        };
        let x = net.params()[t].1.as_slice().expect("contiguous parameter")[off];
        let numeric = (eval(&mut probe, x + h) - eval(&mut probe, x - h)) / (2.0 * h);
        let a = grads[t][off];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

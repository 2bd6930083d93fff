use ndarray::{s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::policy::{AGENT_FEATURES, CANDIDATE_FEATURES};

pub type Mat = Array2<f64>;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub hidden: usize,
    pub agent_dim: usize,
    pub candidate_dim: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { d_model: 64, heads: 4, layers: 2, hidden: 64, agent_dim: AGENT_FEATURES, candidate_dim: CANDIDATE_FEATURES }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), String> {
        let dims = [self.d_model, self.heads, self.hidden, self.agent_dim, self.candidate_dim];
        if dims.contains(&0) {
            return Err("all dimensions must be at least 1".into());
        }
        if self.d_model % self.heads != 0 {
            return Err(format!("d_model {} is not divisible by {} heads", self.d_model, self.heads));
        }
        Ok(())
    }
}

fn init(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
}

fn row_sum(m: &Mat) -> Mat {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// Two-layer perceptron `in -> hidden (tanh) -> out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    x: Mat,
    h: Mat,
}

impl Mlp {
    fn new(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self { w1: init(input, hidden, rng), b1: Mat::zeros((1, hidden)), w2: init(hidden, output, rng), b2: Mat::zeros((1, output)) }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, MlpCache) {
        let h = (x.dot(&self.w1) + &self.b1).mapv(f64::tanh);
        let y = h.dot(&self.w2) + &self.b2;
        (y, MlpCache { x: x.clone(), h })
    }

    pub fn backward(&self, cache: &MlpCache, dy: &Mat, grad: &mut Mlp) -> Mat {
        grad.w2 += &cache.h.t().dot(dy);
        grad.b2 += &row_sum(dy);
        let dh = dy.dot(&self.w2.t());
        let dpre = dh * cache.h.mapv(|h| 1.0 - h * h);
        grad.w1 += &cache.x.t().dot(&dpre);
        grad.b1 += &row_sum(&dpre);
        dpre.dot(&self.w1.t())
    }

    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat)>) {
        out.push((format!("{prefix}.w1"), &self.w1));
        out.push((format!("{prefix}.b1"), &self.b1));
        out.push((format!("{prefix}.w2"), &self.w2));
        out.push((format!("{prefix}.b2"), &self.b2));
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Mat)>) {
        out.push((format!("{prefix}.w1"), &mut self.w1));
        out.push((format!("{prefix}.b1"), &mut self.b1));
        out.push((format!("{prefix}.w2"), &mut self.w2));
        out.push((format!("{prefix}.b2"), &mut self.b2));
    }
}

#[derive(Debug, Clone)]
struct LnCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Mat, g: &Mat, b: &Mat) -> (Mat, LnCache) {
    let n = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mu = row.sum() / n;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        let is = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mu) * is);
        inv_std.push(is);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(cache: &LnCache, g: &Mat, dy: &Mat, dg: &mut Mat, db: &mut Mat) -> Mat {
    *dg += &row_sum(&(dy * &cache.xhat));
    *db += &row_sum(dy);
    let dxhat = dy * g;
    let n = dy.ncols() as f64;
    let mut dx = Mat::zeros(dy.raw_dim());
    for i in 0..dy.nrows() {
        let dr = dxhat.row(i);
        let xr = cache.xhat.row(i);
        let s1 = dr.sum();
        let s2 = dr.dot(&xr);
        let is = cache.inv_std[i];
        for j in 0..dy.ncols() {
            dx[[i, j]] = is / n * (n * dr[j] - s1 - xr[j] * s2);
        }
    }
    dx
}

fn softmax_rows(m: &mut Mat) {
    for mut row in m.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| if v == f64::NEG_INFINITY { 0.0 } else { (v - max).exp() });
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
}

/// Post-norm transformer encoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
    pub bo: Mat,
    pub ln1_g: Mat,
    pub ln1_b: Mat,
    pub ff: Mlp,
    pub ln2_g: Mat,
    pub ln2_b: Mat,
}

#[derive(Debug, Clone)]
struct LayerCache {
    x: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    probs: Vec<Mat>,
    o: Mat,
    ln1: LnCache,
    ff: MlpCache,
    ln2: LnCache,
}

impl EncoderLayer {
    fn new(d: usize, rng: &mut impl Rng) -> Self {
        Self {
            wq: init(d, d, rng),
            wk: init(d, d, rng),
            wv: init(d, d, rng),
            wo: init(d, d, rng),
            bo: Mat::zeros((1, d)),
            ln1_g: Mat::ones((1, d)),
            ln1_b: Mat::zeros((1, d)),
            ff: Mlp::new(d, 2 * d, d, rng),
            ln2_g: Mat::ones((1, d)),
            ln2_b: Mat::zeros((1, d)),
        }
    }

    fn forward(&self, x: &Mat, len: usize, heads: usize) -> (Mat, LayerCache) {
        let (q, k, v) = (x.dot(&self.wq), x.dot(&self.wk), x.dot(&self.wv));
        let (o, probs) = multi_head(&q, &k, &v, len, heads);
        let att = o.dot(&self.wo) + &self.bo;
        let (y, ln1) = layer_norm(&(x + &att), &self.ln1_g, &self.ln1_b);
        let (f, ff) = self.ff.forward(&y);
        let (z, ln2) = layer_norm(&(&y + &f), &self.ln2_g, &self.ln2_b);
        (z, LayerCache { x: x.clone(), q, k, v, probs, o, ln1, ff, ln2 })
    }

    fn backward(&self, c: &LayerCache, dz: &Mat, g: &mut EncoderLayer, heads: usize) -> Mat {
        let dyf = layer_norm_backward(&c.ln2, &self.ln2_g, dz, &mut g.ln2_g, &mut g.ln2_b);
        let dy = &dyf + &self.ff.backward(&c.ff, &dyf, &mut g.ff);
        let dxa = layer_norm_backward(&c.ln1, &self.ln1_g, &dy, &mut g.ln1_g, &mut g.ln1_b);
        g.wo += &c.o.t().dot(&dxa);
        g.bo += &row_sum(&dxa);
        let d_o = dxa.dot(&self.wo.t());
        let (dq, dk, dv) = multi_head_backward(c, &d_o, heads);
        g.wq += &c.x.t().dot(&dq);
        g.wk += &c.x.t().dot(&dk);
        g.wv += &c.x.t().dot(&dv);
        dxa + dq.dot(&self.wq.t()) + dk.dot(&self.wk.t()) + dv.dot(&self.wv.t())
    }

    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Mat)>) {
        for (n, m) in [("wq", &self.wq), ("wk", &self.wk), ("wv", &self.wv), ("wo", &self.wo), ("bo", &self.bo), ("ln1_g", &self.ln1_g), ("ln1_b", &self.ln1_b)] {
            out.push((format!("{prefix}.{n}"), m));
        }
        self.ff.params(&format!("{prefix}.ff"), out);
        out.push((format!("{prefix}.ln2_g"), &self.ln2_g));
        out.push((format!("{prefix}.ln2_b"), &self.ln2_b));
    }

    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Mat)>) {
        for (n, m) in [
            ("wq", &mut self.wq),
            ("wk", &mut self.wk),
            ("wv", &mut self.wv),
            ("wo", &mut self.wo),
            ("bo", &mut self.bo),
            ("ln1_g", &mut self.ln1_g),
            ("ln1_b", &mut self.ln1_b),
        ] {
            out.push((format!("{prefix}.{n}"), m));
        }
        self.ff.params_mut(&format!("{prefix}.ff"), out);
        out.push((format!("{prefix}.ln2_g"), &mut self.ln2_g));
        out.push((format!("{prefix}.ln2_b"), &mut self.ln2_b));
    }
}

/// Scaled dot-product attention per head over the first `len` keys.
/// Scores are divided by `sqrt(d_model)`; each head has width `d_model / heads`.
pub fn multi_head(q: &Mat, k: &Mat, v: &Mat, len: usize, heads: usize) -> (Mat, Vec<Mat>) {
    let (l, d) = q.dim();
    let dh = d / heads;
    let scale = 1.0 / (d as f64).sqrt();
    let mut o = Mat::zeros((l, d));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut sc = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        for i in 0..l {
            for j in len..l {
                sc[[i, j]] = f64::NEG_INFINITY;
            }
        }
        softmax_rows(&mut sc);
        o.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
        probs.push(sc);
    }
    (o, probs)
}

fn multi_head_backward(c: &LayerCache, d_o: &Mat, heads: usize) -> (Mat, Mat, Mat) {
    let d = c.q.ncols();
    let dh = d / heads;
    let scale = 1.0 / (d as f64).sqrt();
    let (mut dq, mut dk, mut dv) = (Mat::zeros(c.q.raw_dim()), Mat::zeros(c.k.raw_dim()), Mat::zeros(c.v.raw_dim()));
    for (h, p) in c.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let doh = d_o.slice(cols);
        let dp = doh.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p.t().dot(&doh));
        let inner = (&dp * p).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = p * &(&dp - &inner) * scale;
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    (dq, dk, dv)
}

/// One network input: agent features, candidate rows (possibly padded),
/// depot flags and the number of valid rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub agent: Mat,
    pub candidates: Mat,
    pub depot: Vec<bool>,
    pub len: usize,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    agent: MlpCache,
    task_rows: Vec<usize>,
    depot_rows: Vec<usize>,
    task: Option<MlpCache>,
    depot: Option<MlpCache>,
    zin: Mat,
    layers: Vec<LayerCache>,
    actor: MlpCache,
    critic1: MlpCache,
    critic2: MlpCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetOutput {
    pub logits: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
}

/// Encoders, attention stack, actor head and twin critic heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetConfig,
    pub agent_enc: Mlp,
    pub task_enc: Mlp,
    pub depot_enc: Mlp,
    pub fuse_w: Mat,
    pub fuse_b: Mat,
    pub layers: Vec<EncoderLayer>,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
}

fn gather(m: &Mat, rows: &[usize]) -> Mat {
    m.select(Axis(0), rows)
}

impl Network {
    pub fn new(config: NetConfig, rng: &mut impl Rng) -> Self {
        let (d, h) = (config.d_model, config.hidden);
        Self {
            config,
            agent_enc: Mlp::new(config.agent_dim, h, d, rng),
            task_enc: Mlp::new(config.candidate_dim, h, d, rng),
            depot_enc: Mlp::new(config.candidate_dim, h, d, rng),
            fuse_w: init(2 * d, d, rng),
            fuse_b: Mat::zeros((1, d)),
            layers: (0..config.layers).map(|_| EncoderLayer::new(d, rng)).collect(),
            actor: Mlp::new(d, h, 1, rng),
            critic1: Mlp::new(d, h, 1, rng),
            critic2: Mlp::new(d, h, 1, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, p) in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    /// Named parameter tensors in a fixed order.
    pub fn params(&self) -> Vec<(String, &Mat)> {
        let mut out = Vec::new();
        self.agent_enc.params("enc.agent", &mut out);
        self.task_enc.params("enc.task", &mut out);
        self.depot_enc.params("enc.depot", &mut out);
        out.push(("enc.fuse.w".into(), &self.fuse_w));
        out.push(("enc.fuse.b".into(), &self.fuse_b));
        for (i, l) in self.layers.iter().enumerate() {
            l.params(&format!("enc.layer{i}"), &mut out);
        }
        self.actor.params("actor", &mut out);
        self.critic1.params("critic1", &mut out);
        self.critic2.params("critic2", &mut out);
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut out = Vec::new();
        self.agent_enc.params_mut("enc.agent", &mut out);
        self.task_enc.params_mut("enc.task", &mut out);
        self.depot_enc.params_mut("enc.depot", &mut out);
        out.push(("enc.fuse.w".into(), &mut self.fuse_w));
        out.push(("enc.fuse.b".into(), &mut self.fuse_b));
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.params_mut(&format!("enc.layer{i}"), &mut out);
        }
        self.actor.params_mut("actor", &mut out);
        self.critic1.params_mut("critic1", &mut out);
        self.critic2.params_mut("critic2", &mut out);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Joint candidate embeddings `X_t`: each row projects the concatenation
    /// of the encoded agent and the encoded candidate.
    pub fn encode_fuse(&self, x: &Sample) -> Mat {
        self.encode(x).0
    }

    fn encode(&self, x: &Sample) -> (Mat, MlpCache, Vec<usize>, Vec<usize>, Option<MlpCache>, Option<MlpCache>, Mat) {
        let d = self.config.d_model;
        let l = x.candidates.nrows();
        let (a, agent_c) = self.agent_enc.forward(&x.agent);
        let depot_rows: Vec<usize> = (0..l).filter(|&i| x.depot[i]).collect();
        let task_rows: Vec<usize> = (0..l).filter(|&i| !x.depot[i]).collect();
        let mut zin = Mat::zeros((l, 2 * d));
        for i in 0..l {
            zin.slice_mut(s![i, ..d]).assign(&a.row(0));
        }
        let mut encode_rows = |enc: &Mlp, rows: &[usize]| {
            if rows.is_empty() {
                return None;
            }
            let (e, c) = enc.forward(&gather(&x.candidates, rows));
            for (r, &i) in rows.iter().enumerate() {
                zin.slice_mut(s![i, d..]).assign(&e.row(r));
            }
            Some(c)
        };
        let task_c = encode_rows(&self.task_enc, &task_rows);
        let depot_c = encode_rows(&self.depot_enc, &depot_rows);
        let x0 = zin.dot(&self.fuse_w) + &self.fuse_b;
        (x0, agent_c, task_rows, depot_rows, task_c, depot_c, zin)
    }

    pub fn forward_cached(&self, x: &Sample) -> (NetOutput, ForwardCache) {
        let (mut h, agent, task_rows, depot_rows, task, depot, zin) = self.encode(x);
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (z, c) = l.forward(&h, x.len, self.config.heads);
            layers.push(c);
            h = z;
        }
        let (z, actor) = self.actor.forward(&h);
        let (q1, critic1) = self.critic1.forward(&h);
        let (q2, critic2) = self.critic2.forward(&h);
        let out = NetOutput { logits: z.column(0).to_vec(), q1: q1.column(0).to_vec(), q2: q2.column(0).to_vec() };
        (out, ForwardCache { agent, task_rows, depot_rows, task, depot, zin, layers, actor, critic1, critic2 })
    }

    pub fn forward_sample(&self, x: &Sample) -> NetOutput {
        self.forward_cached(x).0
    }

    /// Accumulates into `grad` the gradient of a loss with partial
    /// derivatives `dq1`, `dq2` w.r.t. the critic outputs, through the
    /// critic heads and the shared encoder. Returns the gradient w.r.t. the
    /// candidate input rows.
    pub fn backward_critic(&self, c: &ForwardCache, dq1: &[f64], dq2: &[f64], grad: &mut Network) -> Mat {
        let col = |v: &[f64]| Mat::from_shape_vec((v.len(), 1), v.to_vec()).expect("column shape");
        let mut dh = self.critic1.backward(&c.critic1, &col(dq1), &mut grad.critic1);
        dh += &self.critic2.backward(&c.critic2, &col(dq2), &mut grad.critic2);
        for (i, l) in self.layers.iter().enumerate().rev() {
            dh = l.backward(&c.layers[i], &dh, &mut grad.layers[i], self.config.heads);
        }
        let d = self.config.d_model;
        grad.fuse_w += &c.zin.t().dot(&dh);
        grad.fuse_b += &row_sum(&dh);
        let dzin = dh.dot(&self.fuse_w.t());
        let da = row_sum(&dzin.slice(s![.., ..d]).to_owned());
        self.agent_enc.backward(&c.agent, &da, &mut grad.agent_enc);
        let mut dx = Mat::zeros((dzin.nrows(), self.config.candidate_dim));
        for (enc, g, rows, cache) in [
            (&self.task_enc, &mut grad.task_enc, &c.task_rows, &c.task),
            (&self.depot_enc, &mut grad.depot_enc, &c.depot_rows, &c.depot),
        ] {
            if let Some(cache) = cache {
                let de = gather(&dzin.slice(s![.., d..]).to_owned(), rows);
                let dxr = enc.backward(cache, &de, g);
                for (r, &i) in rows.iter().enumerate() {
                    dx.row_mut(i).assign(&dxr.row(r));
                }
            }
        }
        dx
    }

    /// Accumulates the gradient w.r.t. the actor head only; the encoder
    /// output is treated as fixed.
    pub fn backward_actor(&self, c: &ForwardCache, dz: &[f64], grad: &mut Network) {
        let dz = Mat::from_shape_vec((dz.len(), 1), dz.to_vec()).expect("column shape");
        self.actor.backward(&c.actor, &dz, &mut grad.actor);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_attention(q: &Mat, k: &Mat, v: &Mat, heads: usize) -> Mat {
        let (l, d) = q.dim();
        let dh = d / heads;
        let mut out = Mat::zeros((l, d));
        for h in 0..heads {
            for i in 0..l {
                let mut w = vec![0.0; l];
                for j in 0..l {
                    let mut s = 0.0;
                    for c in 0..dh {
                        s += q[[i, h * dh + c]] * k[[j, h * dh + c]];
                    }
                    w[j] = (s / (d as f64).sqrt()).exp();
                }
                let z: f64 = w.iter().sum();
                for j in 0..l {
                    for c in 0..dh {
                        out[[i, h * dh + c]] += w[j] / z * v[[j, h * dh + c]];
                    }
                }
            }
        }
        out
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
        Mat::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn attention_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (q, k, v) = (random(3, 8, &mut rng), random(3, 8, &mut rng), random(3, 8, &mut rng));
        let (o, _) = multi_head(&q, &k, &v, 3, 2);
        let n = naive_attention(&q, &k, &v, 2);
        assert!((&o - &n).iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn zero_queries_average_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (k, v) = (random(4, 8, &mut rng), random(4, 8, &mut rng));
        let (o, _) = multi_head(&Mat::zeros((4, 8)), &k, &v, 4, 2);
        let mean = v.mean_axis(Axis(0)).unwrap();
        for row in o.rows() {
            assert!((&row - &mean).iter().all(|e| e.abs() < 1e-12));
        }
    }

    #[test]
    fn single_key_returns_its_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (q, k, v) = (random(1, 8, &mut rng), random(1, 8, &mut rng), random(1, 8, &mut rng));
        let (o, _) = multi_head(&q, &k, &v, 1, 4);
        assert!((&o - &v).iter().all(|e| e.abs() < 1e-15));
    }

    #[test]
    fn padded_keys_get_zero_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (q, k, v) = (random(3, 4, &mut rng), random(3, 4, &mut rng), random(3, 4, &mut rng));
        let (_, p) = multi_head(&q, &k, &v, 2, 2);
        for m in p {
            assert!(m.column(2).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn zero_weights_broadcast_bias() {
        let cfg = NetConfig { d_model: 8, heads: 2, layers: 1, hidden: 8, ..NetConfig::default() };
        let mut net = Network::new(cfg, &mut ChaCha8Rng::seed_from_u64(5));
        for (_, p) in net.params_mut() {
            p.fill(0.0);
        }
        net.fuse_b.fill(0.5);
        let x = Sample {
            agent: Mat::ones((1, 8)),
            candidates: Mat::ones((3, 8)),
            depot: vec![false, false, true],
            len: 3,
        };
        let x0 = net.encode_fuse(&x);
        assert_eq!(x0.dim(), (3, 8));
        assert!(x0.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn layer_count_and_names_are_stable() {
        let net = Network::new(NetConfig::default(), &mut ChaCha8Rng::seed_from_u64(6));
        let names: Vec<String> = net.params().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.first().map(String::as_str), Some("enc.agent.w1"));
        assert_eq!(names.last().map(String::as_str), Some("critic2.b2"));
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }
}

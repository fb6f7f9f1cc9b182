use ndarray::{s, Array2};
use rand::Rng;

use super::linear::Linear;
use super::ops::softmax_rows;
use super::param::{Param, ParamVisitor};

/// Multi-head scaled dot-product attention. Self-attention passes the same
/// tensor for queries and keys/values; cross-attention passes the encoder
/// output as `kv`.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub q_proj: Linear,
    pub k_proj: Linear,
    pub v_proj: Linear,
    pub o_proj: Linear,
    pub n_heads: usize,
}

pub struct AttnCache {
    q_in: Array2<f32>,
    kv_in: Array2<f32>,
    q: Array2<f32>,
    k: Array2<f32>,
    v: Array2<f32>,
    /// per-head attention weights [Tq, Tk]
    weights: Vec<Array2<f32>>,
    ctx: Array2<f32>,
}

impl MultiHeadAttention {
    pub fn new(name: &str, d_model: usize, n_heads: usize, rng: &mut impl Rng) -> Self {
        assert!(d_model % n_heads == 0, "d_model must be divisible by n_heads");
        MultiHeadAttention {
            q_proj: Linear::new(&format!("{name}.q"), d_model, d_model, rng),
            k_proj: Linear::new(&format!("{name}.k"), d_model, d_model, rng),
            v_proj: Linear::new(&format!("{name}.v"), d_model, d_model, rng),
            o_proj: Linear::new(&format!("{name}.o"), d_model, d_model, rng),
            n_heads,
        }
    }

    pub fn attach_lora(&mut self, rank: usize, rng: &mut impl Rng) {
        self.q_proj.attach_lora(rank, rng);
        self.k_proj.attach_lora(rank, rng);
        self.v_proj.attach_lora(rank, rng);
        self.o_proj.attach_lora(rank, rng);
    }

    pub fn forward(&self, q_in: &Array2<f32>, kv_in: &Array2<f32>, causal: bool) -> (Array2<f32>, AttnCache) {
        let d = q_in.ncols();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let q = self.q_proj.forward(q_in);
        let k = self.k_proj.forward(kv_in);
        let v = self.v_proj.forward(kv_in);
        let tq = q.nrows();
        let mut ctx = Array2::zeros((tq, d));
        let mut weights = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let cols = h * dh..(h + 1) * dh;
            let qh = q.slice(s![.., cols.clone()]);
            let kh = k.slice(s![.., cols.clone()]);
            let vh = v.slice(s![.., cols.clone()]);
            let mut scores = qh.dot(&kh.t());
            scores.mapv_inplace(|x| x * scale);
            if causal {
                for i in 0..scores.nrows() {
                    for j in i + 1..scores.ncols() {
                        scores[[i, j]] = f32::NEG_INFINITY;
                    }
                }
            }
            let a = softmax_rows(&scores);
            let ctx_h = a.dot(&vh);
            ctx.slice_mut(s![.., cols]).assign(&ctx_h);
            weights.push(a);
        }
        let out = self.o_proj.forward(&ctx);
        (
            out,
            AttnCache {
                q_in: q_in.clone(),
                kv_in: kv_in.clone(),
                q,
                k,
                v,
                weights,
                ctx,
            },
        )
    }

    /// Returns (dL/dq_in, dL/dkv_in). For self-attention the caller sums
    /// them.
    pub fn backward(&mut self, cache: &AttnCache, grad_out: &Array2<f32>) -> (Array2<f32>, Array2<f32>) {
        let d = cache.q_in.ncols();
        let dh = d / self.n_heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let grad_ctx = self.o_proj.backward(&cache.ctx, grad_out);
        let mut grad_q = Array2::zeros(cache.q.dim());
        let mut grad_k = Array2::zeros(cache.k.dim());
        let mut grad_v = Array2::zeros(cache.v.dim());
        for h in 0..self.n_heads {
            let cols = h * dh..(h + 1) * dh;
            let qh = cache.q.slice(s![.., cols.clone()]);
            let kh = cache.k.slice(s![.., cols.clone()]);
            let vh = cache.v.slice(s![.., cols.clone()]);
            let a = &cache.weights[h];
            let g_ctx_h = grad_ctx.slice(s![.., cols.clone()]);
            // ctx_h = a . vh
            let g_a = g_ctx_h.dot(&vh.t());
            let g_vh = a.t().dot(&g_ctx_h);
            // softmax backward per row
            let mut g_scores = Array2::zeros(a.dim());
            for i in 0..a.nrows() {
                let arow = a.row(i);
                let grow = g_a.row(i);
                let dot: f32 = arow.iter().zip(grow.iter()).map(|(x, y)| x * y).sum();
                for j in 0..a.ncols() {
                    g_scores[[i, j]] = arow[j] * (grow[j] - dot);
                }
            }
            g_scores.mapv_inplace(|x| x * scale);
            let g_qh = g_scores.dot(&kh);
            let g_kh = g_scores.t().dot(&qh);
            grad_q.slice_mut(s![.., cols.clone()]).assign(&g_qh);
            grad_k.slice_mut(s![.., cols.clone()]).assign(&g_kh);
            grad_v.slice_mut(s![.., cols]).assign(&g_vh);
        }
        let g_q_in = self.q_proj.backward(&cache.q_in, &grad_q);
        let mut g_kv_in = self.k_proj.backward(&cache.kv_in, &grad_k);
        g_kv_in += &self.v_proj.backward(&cache.kv_in, &grad_v);
        (g_q_in, g_kv_in)
    }
}

impl ParamVisitor for MultiHeadAttention {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.q_proj.visit_params(f);
        self.k_proj.visit_params(f);
        self.v_proj.visit_params(f);
        self.o_proj.visit_params(f);
    }
}

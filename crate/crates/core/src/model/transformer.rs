use ndarray::{Array2, Ix2};
use rand::Rng;

use crate::nn::{
    gelu, gelu_backward, sinusoid_positions, AttnCache, LayerNorm, LayerNormCache, Linear,
    MultiHeadAttention, Param, ParamVisitor,
};

/// Pre-norm transformer encoder block: self-attention and a GELU MLP, each
/// behind a residual connection.
#[derive(Debug, Clone)]
pub struct EncoderBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

pub struct EncoderBlockCache {
    ln1: LayerNormCache,
    attn: AttnCache,
    ln2: LayerNormCache,
    f_in: Array2<f32>,
    h: Array2<f32>,
    g: Array2<f32>,
}

impl EncoderBlock {
    fn new(name: &str, d: usize, heads: usize, ffn: usize, rng: &mut impl Rng) -> Self {
        EncoderBlock {
            ln1: LayerNorm::new(&format!("{name}.ln1"), d),
            attn: MultiHeadAttention::new(&format!("{name}.attn"), d, heads, rng),
            ln2: LayerNorm::new(&format!("{name}.ln2"), d),
            fc1: Linear::new(&format!("{name}.fc1"), d, ffn, rng),
            fc2: Linear::new(&format!("{name}.fc2"), ffn, d, rng),
        }
    }

    fn forward(&self, x: &Array2<f32>) -> (Array2<f32>, EncoderBlockCache) {
        let (a_in, ln1) = self.ln1.forward(x);
        let (attn_out, attn) = self.attn.forward(&a_in, &a_in, false);
        let x1 = x + &attn_out;
        let (f_in, ln2) = self.ln2.forward(&x1);
        let h = self.fc1.forward(&f_in);
        let g = gelu(&h);
        let y = &x1 + &self.fc2.forward(&g);
        (y, EncoderBlockCache { ln1, attn, ln2, f_in, h, g })
    }

    fn backward(&mut self, cache: &EncoderBlockCache, grad_out: &Array2<f32>) -> Array2<f32> {
        let grad_g = self.fc2.backward(&cache.g, grad_out);
        let grad_h = gelu_backward(&cache.h, &grad_g);
        let grad_f_in = self.fc1.backward(&cache.f_in, &grad_h);
        let mut grad_x1 = grad_out + &self.ln2.backward(&cache.ln2, &grad_f_in);
        let (gq, gkv) = self.attn.backward(&cache.attn, &grad_x1);
        let grad_a_in = &gq + &gkv;
        let grad_from_ln1 = self.ln1.backward(&cache.ln1, &grad_a_in);
        grad_x1 += &grad_from_ln1;
        grad_x1
    }
}

impl ParamVisitor for EncoderBlock {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.ln1.visit_params(f);
        self.attn.visit_params(f);
        self.ln2.visit_params(f);
        self.fc1.visit_params(f);
        self.fc2.visit_params(f);
    }
}

/// Encoder over frontend frames with fixed sinusoidal positions and a
/// final layer norm.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub blocks: Vec<EncoderBlock>,
    pub ln_f: LayerNorm,
    pub d_model: usize,
}

pub struct EncoderCache {
    blocks: Vec<EncoderBlockCache>,
    ln_f: LayerNormCache,
}

impl Encoder {
    pub fn new(d: usize, heads: usize, ffn: usize, layers: usize, rng: &mut impl Rng) -> Self {
        let blocks = (0..layers)
            .map(|i| EncoderBlock::new(&format!("encoder.b{i}"), d, heads, ffn, rng))
            .collect();
        Encoder {
            blocks,
            ln_f: LayerNorm::new("encoder.ln_f", d),
            d_model: d,
        }
    }

    /// `frames`: [T_frames, d_model] from the frontend. Positions are added
    /// here.
    pub fn forward(&self, frames: &Array2<f32>) -> (Array2<f32>, EncoderCache) {
        let mut x = frames + &sinusoid_positions(frames.nrows(), self.d_model);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&x);
            x = y;
            caches.push(c);
        }
        let (out, ln_f) = self.ln_f.forward(&x);
        (out, EncoderCache { blocks: caches, ln_f })
    }

    /// Returns dL/d(frontend frames).
    pub fn backward(&mut self, cache: &EncoderCache, grad_out: &Array2<f32>) -> Array2<f32> {
        let mut grad = self.ln_f.backward(&cache.ln_f, grad_out);
        for (b, c) in self.blocks.iter_mut().zip(cache.blocks.iter()).rev() {
            grad = b.backward(c, &grad);
        }
        grad
    }
}

impl ParamVisitor for Encoder {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for b in &mut self.blocks {
            b.visit_params(f);
        }
        self.ln_f.visit_params(f);
    }
}

/// Pre-norm decoder block: causal self-attention, cross-attention over the
/// encoder output, GELU MLP.
#[derive(Debug, Clone)]
pub struct DecoderBlock {
    pub ln1: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub ln3: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

pub struct DecoderBlockCache {
    ln1: LayerNormCache,
    self_attn: AttnCache,
    ln2: LayerNormCache,
    cross_attn: AttnCache,
    ln3: LayerNormCache,
    f_in: Array2<f32>,
    h: Array2<f32>,
    g: Array2<f32>,
}

impl DecoderBlock {
    fn new(name: &str, d: usize, heads: usize, ffn: usize, rng: &mut impl Rng) -> Self {
        DecoderBlock {
            ln1: LayerNorm::new(&format!("{name}.ln1"), d),
            self_attn: MultiHeadAttention::new(&format!("{name}.self_attn"), d, heads, rng),
            ln2: LayerNorm::new(&format!("{name}.ln2"), d),
            cross_attn: MultiHeadAttention::new(&format!("{name}.cross_attn"), d, heads, rng),
            ln3: LayerNorm::new(&format!("{name}.ln3"), d),
            fc1: Linear::new(&format!("{name}.fc1"), d, ffn, rng),
            fc2: Linear::new(&format!("{name}.fc2"), ffn, d, rng),
        }
    }

    fn forward(&self, x: &Array2<f32>, enc: &Array2<f32>) -> (Array2<f32>, DecoderBlockCache) {
        let (a_in, ln1) = self.ln1.forward(x);
        let (sa, self_attn) = self.self_attn.forward(&a_in, &a_in, true);
        let x1 = x + &sa;
        let (c_in, ln2) = self.ln2.forward(&x1);
        let (ca, cross_attn) = self.cross_attn.forward(&c_in, enc, false);
        let x2 = &x1 + &ca;
        let (f_in, ln3) = self.ln3.forward(&x2);
        let h = self.fc1.forward(&f_in);
        let g = gelu(&h);
        let y = &x2 + &self.fc2.forward(&g);
        (
            y,
            DecoderBlockCache { ln1, self_attn, ln2, cross_attn, ln3, f_in, h, g },
        )
    }

    /// Returns (dL/dx, dL/denc) for this block.
    fn backward(
        &mut self,
        cache: &DecoderBlockCache,
        grad_out: &Array2<f32>,
    ) -> (Array2<f32>, Array2<f32>) {
        let grad_g = self.fc2.backward(&cache.g, grad_out);
        let grad_h = gelu_backward(&cache.h, &grad_g);
        let grad_f_in = self.fc1.backward(&cache.f_in, &grad_h);
        let mut grad_x2 = grad_out + &self.ln3.backward(&cache.ln3, &grad_f_in);
        let (g_c_in, g_enc) = self.cross_attn.backward(&cache.cross_attn, &grad_x2);
        let mut grad_x1 = &grad_x2 + &self.ln2.backward(&cache.ln2, &g_c_in);
        let (gq, gkv) = self.self_attn.backward(&cache.self_attn, &grad_x1);
        let grad_a_in = &gq + &gkv;
        grad_x1 += &self.ln1.backward(&cache.ln1, &grad_a_in);
        grad_x2 = grad_x1;
        (grad_x2, g_enc)
    }
}

impl ParamVisitor for DecoderBlock {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.ln1.visit_params(f);
        self.self_attn.visit_params(f);
        self.ln2.visit_params(f);
        self.cross_attn.visit_params(f);
        self.ln3.visit_params(f);
        self.fc1.visit_params(f);
        self.fc2.visit_params(f);
    }
}

/// Token decoder with tied input/output embeddings and learned positions.
#[derive(Debug, Clone)]
pub struct Decoder {
    /// [vocab, d]
    pub embed: Param,
    /// [max_positions, d]
    pub pos: Param,
    pub blocks: Vec<DecoderBlock>,
    pub ln_f: LayerNorm,
    pub d_model: usize,
}

pub struct DecoderCache {
    tokens: Vec<u32>,
    blocks: Vec<DecoderBlockCache>,
    ln_f: LayerNormCache,
    /// final hidden states feeding the tied output projection
    hidden: Array2<f32>,
}

impl Decoder {
    pub fn new(
        vocab: usize,
        d: usize,
        heads: usize,
        ffn: usize,
        layers: usize,
        max_positions: usize,
        rng: &mut impl Rng,
    ) -> Self {
        // unit-norm-ish embedding rows: with the pre-logit LayerNorm fixing
        // hidden norms near sqrt(d), a smaller scale would cap the logits
        // and put a floor under the cross-entropy
        let scale = (1.0 / d as f32).sqrt();
        let embed = Param::randn("decoder.embed", &[vocab, d], scale, rng);
        let pos = Param::randn("decoder.pos", &[max_positions, d], scale, rng);
        let blocks = (0..layers)
            .map(|i| DecoderBlock::new(&format!("decoder.b{i}"), d, heads, ffn, rng))
            .collect();
        Decoder {
            embed,
            pos,
            blocks,
            ln_f: LayerNorm::new("decoder.ln_f", d),
            d_model: d,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.data.shape()[0]
    }

    pub fn max_positions(&self) -> usize {
        self.pos.data.shape()[0]
    }

    /// Token logits [len(tokens), vocab] conditioned on `enc`.
    pub fn forward(&self, tokens: &[u32], enc: &Array2<f32>) -> (Array2<f32>, DecoderCache) {
        assert!(tokens.len() <= self.max_positions(), "decoder sequence too long");
        let e = self.embed.data.view().into_dimensionality::<Ix2>().unwrap();
        let p = self.pos.data.view().into_dimensionality::<Ix2>().unwrap();
        let mut x = Array2::zeros((tokens.len(), self.d_model));
        for (i, &t) in tokens.iter().enumerate() {
            let mut row = x.row_mut(i);
            row.assign(&e.row(t as usize));
            row += &p.row(i);
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&x, enc);
            x = y;
            caches.push(c);
        }
        let (hidden, ln_f) = self.ln_f.forward(&x);
        let logits = hidden.dot(&e.t());
        (
            logits,
            DecoderCache {
                tokens: tokens.to_vec(),
                blocks: caches,
                ln_f,
                hidden,
            },
        )
    }

    /// Backpropagates dL/dlogits and returns dL/denc. Embedding and
    /// position gradients are only accumulated when trainable (the decoder
    /// is normally fully frozen, but gradients still flow through it).
    pub fn backward(&mut self, cache: &DecoderCache, grad_logits: &Array2<f32>) -> Array2<f32> {
        let e = self.embed.data.view().into_dimensionality::<Ix2>().unwrap();
        let grad_hidden = grad_logits.dot(&e);
        if self.embed.trainable {
            let ge = grad_logits.t().dot(&cache.hidden);
            let mut dst = self.embed.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
            dst += &ge;
        }
        let mut grad = self.ln_f.backward(&cache.ln_f, &grad_hidden);
        let mut grad_enc: Option<Array2<f32>> = None;
        for (b, c) in self.blocks.iter_mut().zip(cache.blocks.iter()).rev() {
            let (gx, ge) = b.backward(c, &grad);
            grad = gx;
            match &mut grad_enc {
                Some(acc) => *acc += &ge,
                None => grad_enc = Some(ge),
            }
        }
        if self.embed.trainable || self.pos.trainable {
            let mut ep = self.pos.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
            let mut ee = self.embed.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
            for (i, &t) in cache.tokens.iter().enumerate() {
                if self.pos.trainable {
                    let mut row = ep.row_mut(i);
                    row += &grad.row(i);
                }
                if self.embed.trainable {
                    let mut row = ee.row_mut(t as usize);
                    row += &grad.row(i);
                }
            }
        }
        grad_enc.expect("decoder has at least one block")
    }
}

impl ParamVisitor for Decoder {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.embed);
        f(&mut self.pos);
        for b in &mut self.blocks {
            b.visit_params(f);
        }
        self.ln_f.visit_params(f);
    }
}

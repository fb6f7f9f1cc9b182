use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{cross_entropy_grad, Param, ParamVisitor};
use crate::signal::Recording;
use crate::{Error, Result};

use super::frontend::Frontend;
use super::tokenizer::{Tokenizer, IGNORE_ID};
use super::transformer::{Decoder, Encoder};
use super::BackboneHandle;

/// Which parameter groups stay frozen and which receive low-rank adapters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainabilityPlan {
    pub frozen: Vec<String>,
    pub adapted: Vec<String>,
    pub adapter_rank_budget: usize,
}

impl Default for TrainabilityPlan {
    fn default() -> Self {
        TrainabilityPlan {
            frozen: vec!["decoder".to_string()],
            adapted: vec!["encoder".to_string(), "frontend".to_string()],
            adapter_rank_budget: 8,
        }
    }
}

impl TrainabilityPlan {
    pub fn validate(&self) -> Result<()> {
        for g in self.frozen.iter().chain(self.adapted.iter()) {
            if !matches!(g.as_str(), "frontend" | "encoder" | "decoder") {
                return Err(Error::config(format!("unknown parameter group '{g}'")));
            }
        }
        if let Some(g) = self.adapted.iter().find(|g| self.frozen.contains(g)) {
            return Err(Error::config(format!(
                "group '{g}' listed as both frozen and adapted"
            )));
        }
        if self.adapted.is_empty() {
            return Err(Error::config("trainable set is empty: no adapted groups"));
        }
        if self.adapter_rank_budget == 0 {
            return Err(Error::config("adapter rank budget must be >= 1"));
        }
        Ok(())
    }
}

/// The grafted model: frontend in place of the backbone's audio embedding,
/// plus the backbone's encoder and (frozen) decoder.
#[derive(Debug, Clone)]
pub struct AdaptedModel {
    pub frontend: Frontend,
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub handle: BackboneHandle,
    pub window_samples: usize,
}

fn fnv64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Builds the backbone weights deterministically from the identifier and
/// attaches the frontend. The frontend's output frame count for the given
/// input window must equal the encoder's frame capacity.
pub fn graft(handle: BackboneHandle, frontend: Frontend, window_samples: usize) -> Result<AdaptedModel> {
    if frontend.d_model() != handle.spec.d_model {
        return Err(Error::config(format!(
            "frontend width {} does not match backbone width {}",
            frontend.d_model(),
            handle.spec.d_model
        )));
    }
    let frames = frontend.output_frames(window_samples);
    let capacity = handle.encoder_frame_capacity();
    if frames != capacity {
        return Err(Error::config(format!(
            "frontend produces {frames} frames for a {window_samples}-sample window \
             but the encoder expects exactly {capacity} frames"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(fnv64(&handle.identifier));
    let spec = handle.spec;
    let encoder = Encoder::new(spec.d_model, spec.n_heads, spec.ffn_dim, spec.encoder_layers, &mut rng);
    let decoder = Decoder::new(
        handle.tokenizer.vocab_size(),
        spec.d_model,
        spec.n_heads,
        spec.ffn_dim,
        spec.decoder_layers,
        spec.max_target_positions,
        &mut rng,
    );
    Ok(AdaptedModel {
        frontend,
        encoder,
        decoder,
        handle,
        window_samples,
    })
}

/// Appends zero channels so recordings from a smaller sensor array fit a
/// frontend built for `target_channels`. Existing channels are untouched.
pub fn pad_channels(rec: &Recording, target_channels: usize) -> Result<Recording> {
    let current = rec.channels();
    if target_channels < current {
        return Err(Error::config(format!(
            "cannot pad {current} channels down to {target_channels}"
        )));
    }
    if target_channels == current {
        return Ok(rec.clone());
    }
    let mut samples = Array2::zeros((target_channels, rec.time_samples()));
    samples.slice_mut(s![..current, ..]).assign(&rec.samples);
    let channel_names = rec.channel_names.as_ref().map(|names| {
        let mut names = names.clone();
        for i in current..target_channels {
            names.push(format!("pad{i}"));
        }
        names
    });
    Ok(Recording {
        samples,
        sample_rate_hz: rec.sample_rate_hz,
        channel_names,
    })
}

/// Time-major f32 model input of exactly `window` samples: zero-padded on
/// the right, truncated (with a warning) if the segment is longer.
pub fn segment_to_input(rec: &Recording, window: usize) -> Array2<f32> {
    let t = rec.time_samples();
    if t > window {
        log::warn!(
            "segment of {t} samples truncated to the {window}-sample model window"
        );
    }
    let mut x = Array2::zeros((window, rec.channels()));
    for ti in 0..t.min(window) {
        for c in 0..rec.channels() {
            x[[ti, c]] = rec.samples[[c, ti]] as f32;
        }
    }
    x
}

/// Shifted teacher-forcing pair: inputs are all tokens but the last,
/// targets are all but the first, with prompt-internal positions masked.
pub fn training_targets(tokens: &[u32]) -> Result<(Vec<u32>, Vec<u32>)> {
    let prompt = Tokenizer::prompt_len();
    if tokens.len() < prompt + 1 {
        return Err(Error::config("target sequence shorter than prompt + 1"));
    }
    let inputs = tokens[..tokens.len() - 1].to_vec();
    let mut targets = tokens[1..].to_vec();
    for t in targets.iter_mut().take(prompt - 1) {
        *t = IGNORE_ID;
    }
    Ok((inputs, targets))
}

impl AdaptedModel {
    pub fn tokenizer(&self) -> &Tokenizer {
        &self.handle.tokenizer
    }

    pub fn in_channels(&self) -> usize {
        self.frontend.in_channels()
    }

    /// Encoder output for one input window [window_samples, channels].
    pub fn encode(&self, x: &Array2<f32>) -> Array2<f32> {
        assert_eq!(x.nrows(), self.window_samples, "input window length mismatch");
        let (frames, _) = self.frontend.forward(x);
        let (enc, _) = self.encoder.forward(&frames);
        enc
    }

    /// Logits for every position of `tokens` given an encoded window.
    pub fn decode_logits(&self, tokens: &[u32], enc: &Array2<f32>) -> Array2<f32> {
        let (logits, _) = self.decoder.forward(tokens, enc);
        logits
    }

    /// Teacher-forced loss without gradient accumulation.
    pub fn loss(&self, x: &Array2<f32>, tokens: &[u32]) -> Result<f32> {
        let (inputs, targets) = training_targets(tokens)?;
        let enc = self.encode(x);
        let logits = self.decode_logits(&inputs, &enc);
        let (loss, _) = cross_entropy_grad(&logits, &targets, IGNORE_ID);
        Ok(loss)
    }

    /// Teacher-forced loss with full backpropagation; gradients accumulate
    /// into trainable parameters.
    pub fn loss_and_backward(&mut self, x: &Array2<f32>, tokens: &[u32]) -> Result<f32> {
        let (inputs, targets) = training_targets(tokens)?;
        assert_eq!(x.nrows(), self.window_samples, "input window length mismatch");
        let (frames, fc) = self.frontend.forward(x);
        let (enc, ec) = self.encoder.forward(&frames);
        let (logits, dc) = self.decoder.forward(&inputs, &enc);
        let (loss, grad_logits) = cross_entropy_grad(&logits, &targets, IGNORE_ID);
        let grad_enc = self.decoder.backward(&dc, &grad_logits);
        let grad_frames = self.encoder.backward(&ec, &grad_enc);
        self.frontend.backward(&fc, &grad_frames);
        Ok(loss)
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }

    pub fn param_counts(&mut self) -> (usize, usize) {
        let mut trainable = 0;
        let mut total = 0;
        self.visit_params(&mut |p| {
            total += p.len();
            if p.trainable {
                trainable += p.len();
            }
        });
        (trainable, total)
    }
}

impl ParamVisitor for AdaptedModel {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.frontend.visit_params(f);
        self.encoder.visit_params(f);
        self.decoder.visit_params(f);
    }
}

/// Applies the freeze/adapt plan: every parameter frozen, then low-rank
/// adapters attached across the encoder and the frontend marked trainable.
pub fn plan_trainability(model: &mut AdaptedModel, plan: &TrainabilityPlan) -> Result<()> {
    plan.validate()?;
    model.visit_params(&mut |p| p.trainable = false);
    if plan.adapted.iter().any(|g| g == "decoder") {
        return Err(Error::config(
            "the decoder is a frozen backbone component and cannot be adapted",
        ));
    }
    if plan.adapted.iter().any(|g| g == "encoder") {
        // adapter init is seeded separately so the frozen base weights do
        // not depend on whether adapters are attached
        let mut rng =
            ChaCha8Rng::seed_from_u64(fnv64(&model.handle.identifier) ^ plan.adapter_rank_budget as u64);
        for block in &mut model.encoder.blocks {
            if block.fc1.lora.is_none() {
                block.attn.attach_lora(plan.adapter_rank_budget, &mut rng);
                block.fc1.attach_lora(plan.adapter_rank_budget, &mut rng);
                block.fc2.attach_lora(plan.adapter_rank_budget, &mut rng);
            }
        }
        model.encoder.visit_params(&mut |p| {
            if p.name.contains(".lora_") {
                p.trainable = true;
            }
        });
    }
    if plan.adapted.iter().any(|g| g == "frontend") {
        model.frontend.visit_params(&mut |p| p.trainable = true);
    }
    let (trainable, total) = model.param_counts();
    if trainable == 0 {
        return Err(Error::config("trainability plan produced an empty trainable set"));
    }
    debug_assert!(trainable < total);
    Ok(())
}

/// Restricts encoder adapter training to the top `k` blocks; the frontend
/// stays trainable. Requires a plan to have been applied first.
pub fn freeze_layers_except_top_k(model: &mut AdaptedModel, k: usize) -> Result<()> {
    let layers = model.encoder.blocks.len();
    if k > layers {
        return Err(Error::config(format!(
            "cannot unfreeze top {k} encoder blocks: encoder has {layers}"
        )));
    }
    let cutoff = layers - k;
    for (i, block) in model.encoder.blocks.iter_mut().enumerate() {
        let active = i >= cutoff;
        block.visit_params(&mut |p| {
            if p.name.contains(".lora_") {
                p.trainable = active;
            }
        });
    }
    model.frontend.visit_params(&mut |p| p.trainable = true);
    let (trainable, _) = model.param_counts();
    if trainable == 0 {
        return Err(Error::config("freeze produced an empty trainable set"));
    }
    Ok(())
}

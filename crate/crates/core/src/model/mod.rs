//! Adapted encoder-decoder model: a convolutional channel frontend grafted
//! onto a speech-style transformer backbone with a frozen decoder and
//! low-rank adapters on the encoder.

mod adapted;
mod frontend;
mod spec;
mod tokenizer;
mod transformer;

pub use adapted::{
    freeze_layers_except_top_k, graft, pad_channels, plan_trainability, segment_to_input,
    training_targets, AdaptedModel, TrainabilityPlan,
};
pub use frontend::{build_frontend, Frontend, FrontendCache, FrontendConfig};
pub use spec::{backbone_spec, known_backbones, BackboneSpec};
pub use tokenizer::{Tokenizer, BOS_ID, EOS_ID, IGNORE_ID, PAD_ID, UNK_ID};
pub use transformer::{Decoder, DecoderCache, Encoder, EncoderCache};

use crate::Result;

/// Identifies a pretrained backbone plus the vocabulary and language it
/// decodes into. Weights are materialized deterministically from the
/// identifier when the model is built.
#[derive(Debug, Clone)]
pub struct BackboneHandle {
    pub identifier: String,
    pub spec: BackboneSpec,
    pub tokenizer: Tokenizer,
    pub language_tag: String,
}

impl BackboneHandle {
    pub fn new(identifier: &str, tokenizer: Tokenizer, language_tag: &str) -> Result<Self> {
        let spec = backbone_spec(identifier)?;
        Ok(BackboneHandle {
            identifier: identifier.to_string(),
            spec,
            tokenizer,
            language_tag: language_tag.to_string(),
        })
    }

    pub fn encoder_frame_capacity(&self) -> usize {
        self.spec.frame_capacity
    }

    /// Input window in samples that lands exactly on the encoder's frame
    /// capacity after the stride-2 frontend.
    pub fn window_samples(&self) -> usize {
        self.spec.frame_capacity * 2
    }
}

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Architecture hyperparameters for a named backbone size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub d_model: usize,
    pub n_heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub ffn_dim: usize,
    /// Encoder sequence length after the stride-2 frontend.
    pub frame_capacity: usize,
    /// Maximum decoder (target) sequence length.
    pub max_target_positions: usize,
}

const SIZES: &[(&str, BackboneSpec)] = &[
    // full-scale sizes, kept for shape contracts; weights at these sizes
    // are only built on demand
    ("tiny", BackboneSpec { d_model: 384, n_heads: 6, encoder_layers: 4, decoder_layers: 4, ffn_dim: 1536, frame_capacity: 1500, max_target_positions: 448 }),
    ("base", BackboneSpec { d_model: 512, n_heads: 8, encoder_layers: 6, decoder_layers: 6, ffn_dim: 2048, frame_capacity: 1500, max_target_positions: 448 }),
    ("small", BackboneSpec { d_model: 768, n_heads: 12, encoder_layers: 12, decoder_layers: 12, ffn_dim: 3072, frame_capacity: 1500, max_target_positions: 448 }),
    ("medium", BackboneSpec { d_model: 1024, n_heads: 16, encoder_layers: 24, decoder_layers: 24, ffn_dim: 4096, frame_capacity: 1500, max_target_positions: 448 }),
    ("large", BackboneSpec { d_model: 1280, n_heads: 20, encoder_layers: 32, decoder_layers: 32, ffn_dim: 5120, frame_capacity: 1500, max_target_positions: 448 }),
    // desk-scale sizes for synthetic runs on a single CPU core
    ("toy-tiny", BackboneSpec { d_model: 64, n_heads: 2, encoder_layers: 2, decoder_layers: 2, ffn_dim: 256, frame_capacity: 100, max_target_positions: 32 }),
    ("toy-base", BackboneSpec { d_model: 96, n_heads: 4, encoder_layers: 3, decoder_layers: 3, ffn_dim: 384, frame_capacity: 100, max_target_positions: 32 }),
    ("toy-small", BackboneSpec { d_model: 128, n_heads: 4, encoder_layers: 4, decoder_layers: 4, ffn_dim: 512, frame_capacity: 100, max_target_positions: 32 }),
];

pub fn backbone_spec(identifier: &str) -> Result<BackboneSpec> {
    SIZES
        .iter()
        .find(|(name, _)| *name == identifier)
        .map(|(_, s)| *s)
        .ok_or_else(|| {
            Error::config(format!(
                "unknown backbone '{identifier}' (known: {})",
                known_backbones().join(", ")
            ))
        })
}

pub fn known_backbones() -> Vec<&'static str> {
    SIZES.iter().map(|(name, _)| *name).collect()
}

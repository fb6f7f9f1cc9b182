//! Corpus evaluation: metric reports with transcripts, the Gaussian-noise
//! input baseline, and the single-word classification probe.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::generate::{generate, teacher_force_decode, DecodeMode, GenerationConfig};
use crate::metrics::{bleu_n, rouge1, wer, Rouge1};
use crate::model::AdaptedModel;
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
const BLEU_VARIANT: &str = "sentence-level, add-eps smoothing, brevity penalty, corpus mean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptPair {
    pub reference: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub mode: DecodeMode,
    pub baseline: Option<String>,
    /// BLEU-1 through BLEU-4, percent.
    pub bleu: [f64; 4],
    pub rouge1: Rouge1,
    pub wer: f64,
    pub bleu_variant: String,
    pub samples: Vec<TranscriptPair>,
}

impl EvaluationReport {
    pub fn from_pairs(
        mode: DecodeMode,
        baseline: Option<String>,
        references: &[String],
        hypotheses: &[String],
    ) -> Result<EvaluationReport> {
        let bleu = [
            bleu_n(references, hypotheses, 1)?,
            bleu_n(references, hypotheses, 2)?,
            bleu_n(references, hypotheses, 3)?,
            bleu_n(references, hypotheses, 4)?,
        ];
        Ok(EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            mode,
            baseline,
            bleu,
            rouge1: rouge1(references, hypotheses)?,
            wer: wer(references, hypotheses)?,
            bleu_variant: BLEU_VARIANT.to_string(),
            samples: references
                .iter()
                .zip(hypotheses)
                .map(|(r, h)| TranscriptPair {
                    reference: r.clone(),
                    hypothesis: h.clone(),
                })
                .collect(),
        })
    }

    /// Plain-text transcript block for human inspection.
    pub fn transcripts_text(&self) -> String {
        let mut out = String::new();
        for pair in &self.samples {
            let _ = writeln!(out, "Predicted: {}", pair.hypothesis);
            let _ = writeln!(out, "True: {}", pair.reference);
            let _ = writeln!(out);
        }
        out
    }
}

/// Decodes the whole corpus in the configured mode and scores it.
pub fn evaluate_corpus(
    model: &AdaptedModel,
    segments: &[Array2<f32>],
    references: &[String],
    cfg: &GenerationConfig,
) -> Result<EvaluationReport> {
    if segments.len() != references.len() {
        return Err(Error::Eval("segments and references must pair up".to_string()));
    }
    let hypotheses = match cfg.mode {
        DecodeMode::FreeRun => generate(model, segments, cfg)?,
        DecodeMode::TeacherForcing => teacher_force_decode(model, segments, references)?,
    };
    EvaluationReport::from_pairs(cfg.mode, None, references, &hypotheses)
}

/// Replaces every segment with unit-variance Gaussian noise of identical
/// shape and evaluates; a trained model should collapse to near-zero BLEU.
pub fn noise_baseline(
    model: &AdaptedModel,
    segments: &[Array2<f32>],
    references: &[String],
    cfg: &GenerationConfig,
    seed: u64,
) -> Result<EvaluationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Array2<f32>> = segments
        .iter()
        .map(|s| Array2::from_shape_fn(s.dim(), |_| StandardNormal.sample(&mut rng)))
        .collect();
    let mut report = evaluate_corpus(model, &noise, references, cfg)?;
    report.baseline = Some("noise".to_string());
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordProbe {
    pub accuracy: f64,
    pub chance: f64,
    pub ratio: f64,
    pub clips: usize,
    pub vocabulary: usize,
}

/// Decodes single-word clips and scores exact-match accuracy against the
/// chance level 1/|vocabulary|.
pub fn word_probe_eval(
    model: &AdaptedModel,
    clips: &[(Array2<f32>, String)],
    vocabulary: &[String],
    cfg: &GenerationConfig,
) -> Result<WordProbe> {
    if vocabulary.is_empty() {
        return Err(Error::Eval("word probe vocabulary is empty".to_string()));
    }
    if clips.is_empty() {
        return Err(Error::Eval("word probe needs at least one clip".to_string()));
    }
    let segments: Vec<Array2<f32>> = clips.iter().map(|(s, _)| s.clone()).collect();
    let hypotheses = generate(model, &segments, cfg)?;
    let hits = clips
        .iter()
        .zip(&hypotheses)
        .filter(|((_, word), hyp)| hyp.as_str() == word.as_str())
        .count();
    let accuracy = hits as f64 / clips.len() as f64;
    let chance = 1.0 / vocabulary.len() as f64;
    Ok(WordProbe {
        accuracy,
        chance,
        ratio: accuracy / chance,
        clips: clips.len(),
        vocabulary: vocabulary.len(),
    })
}

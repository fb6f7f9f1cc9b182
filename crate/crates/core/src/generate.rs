//! Decoding: free-run beam search with repetition controls, optional
//! nucleus sampling, and teacher-forced argmax decoding.

use std::collections::HashSet;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{AdaptedModel, Tokenizer, EOS_ID};
use crate::nn::log_softmax_rows;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    FreeRun,
    TeacherForcing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub beam_size: usize,
    pub repetition_penalty: f32,
    pub no_repeat_ngram: usize,
    pub max_new_tokens: usize,
    pub mode: DecodeMode,
    /// When set, free-run decoding samples from the top-p nucleus instead
    /// of running beam search.
    pub nucleus_p: Option<f64>,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            beam_size: 5,
            repetition_penalty: 5.0,
            no_repeat_ngram: 2,
            max_new_tokens: 20,
            mode: DecodeMode::FreeRun,
            nucleus_p: None,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::config("beam_size must be >= 1"));
        }
        if self.repetition_penalty <= 0.0 {
            return Err(Error::config("repetition_penalty must be positive"));
        }
        if let Some(p) = self.nucleus_p {
            if !(0.0 < p && p <= 1.0) {
                return Err(Error::config("nucleus_p must lie in (0, 1]"));
            }
        }
        if self.max_new_tokens == 0 {
            return Err(Error::config("max_new_tokens must be >= 1"));
        }
        Ok(())
    }
}

/// Divides positive logits / multiplies negative logits of already-emitted
/// tokens, discouraging their reuse.
fn apply_repetition_penalty(logits: &mut Array1<f32>, tokens: &[u32], penalty: f32) {
    if (penalty - 1.0).abs() < f32::EPSILON {
        return;
    }
    let seen: HashSet<u32> = tokens.iter().copied().collect();
    for t in seen {
        let v = &mut logits[t as usize];
        *v = if *v > 0.0 { *v / penalty } else { *v * penalty };
    }
}

/// Tokens that would complete an n-gram already present in the sequence.
fn banned_ngram_tokens(tokens: &[u32], n: usize) -> Vec<u32> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    let prefix = &tokens[tokens.len() - (n - 1)..];
    let mut banned = Vec::new();
    for window in tokens.windows(n) {
        if &window[..n - 1] == prefix {
            banned.push(window[n - 1]);
        }
    }
    banned
}

#[derive(Clone)]
struct Beam {
    tokens: Vec<u32>,
    log_prob: f32,
    finished: bool,
}

fn masked_log_probs(
    model: &AdaptedModel,
    enc: &Array2<f32>,
    tokens: &[u32],
    cfg: &GenerationConfig,
) -> Array1<f32> {
    let logits = model.decode_logits(tokens, enc);
    let mut last = logits.row(logits.nrows() - 1).to_owned();
    apply_repetition_penalty(&mut last, tokens, cfg.repetition_penalty);
    for t in banned_ngram_tokens(tokens, cfg.no_repeat_ngram) {
        last[t as usize] = f32::NEG_INFINITY;
    }
    let two_d = last.insert_axis(ndarray::Axis(0));
    log_softmax_rows(&two_d).row(0).to_owned()
}

fn beam_search(model: &AdaptedModel, enc: &Array2<f32>, cfg: &GenerationConfig) -> Result<Vec<u32>> {
    let prompt = model.tokenizer().prompt(&model.handle.language_tag)?;
    let budget = cfg
        .max_new_tokens
        .min(model.decoder.max_positions().saturating_sub(prompt.len() + 1));
    let mut beams = vec![Beam { tokens: prompt, log_prob: 0.0, finished: false }];
    for _ in 0..budget {
        if beams.iter().all(|b| b.finished) {
            break;
        }
        let mut candidates: Vec<Beam> = Vec::new();
        for beam in &beams {
            if beam.finished {
                candidates.push(beam.clone());
                continue;
            }
            let lp = masked_log_probs(model, enc, &beam.tokens, cfg);
            // expanding the top beam_size continuations per beam is enough
            // to fill the global top beam_size
            let mut idx: Vec<usize> = (0..lp.len()).collect();
            idx.sort_by(|&a, &b| lp[b].partial_cmp(&lp[a]).unwrap_or(std::cmp::Ordering::Equal));
            for &t in idx.iter().take(cfg.beam_size) {
                if lp[t] == f32::NEG_INFINITY {
                    continue;
                }
                let mut tokens = beam.tokens.clone();
                tokens.push(t as u32);
                candidates.push(Beam {
                    log_prob: beam.log_prob + lp[t],
                    finished: t as u32 == EOS_ID,
                    tokens,
                });
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| {
            b.log_prob.partial_cmp(&a.log_prob).unwrap_or(std::cmp::Ordering::Equal)
        });
        candidates.truncate(cfg.beam_size);
        beams = candidates;
    }
    Ok(beams
        .into_iter()
        .max_by(|a, b| a.log_prob.partial_cmp(&b.log_prob).unwrap_or(std::cmp::Ordering::Equal))
        .expect("at least one beam")
        .tokens)
}

fn nucleus_sample(
    model: &AdaptedModel,
    enc: &Array2<f32>,
    cfg: &GenerationConfig,
    p: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u32>> {
    let prompt = model.tokenizer().prompt(&model.handle.language_tag)?;
    let budget = cfg
        .max_new_tokens
        .min(model.decoder.max_positions().saturating_sub(prompt.len() + 1));
    let mut tokens = prompt;
    for _ in 0..budget {
        let lp = masked_log_probs(model, enc, &tokens, cfg);
        let mut idx: Vec<usize> = (0..lp.len()).collect();
        idx.sort_by(|&a, &b| lp[b].partial_cmp(&lp[a]).unwrap_or(std::cmp::Ordering::Equal));
        // smallest prefix whose probability mass reaches p
        let mut nucleus = Vec::new();
        let mut mass = 0.0f64;
        for &t in &idx {
            let prob = (lp[t] as f64).exp();
            if prob <= 0.0 {
                break;
            }
            nucleus.push((t, prob));
            mass += prob;
            if mass >= p {
                break;
            }
        }
        if nucleus.is_empty() {
            break;
        }
        let draw = rng.random_range(0.0..mass);
        let mut acc = 0.0;
        let mut chosen = nucleus[0].0;
        for (t, prob) in &nucleus {
            acc += prob;
            if draw < acc {
                chosen = *t;
                break;
            }
        }
        tokens.push(chosen as u32);
        if chosen as u32 == EOS_ID {
            break;
        }
    }
    Ok(tokens)
}

/// Free-run decoding: each token is conditioned only on the model's own
/// previously generated prefix. Returns detokenized text per segment.
pub fn generate(
    model: &AdaptedModel,
    segments: &[Array2<f32>],
    cfg: &GenerationConfig,
) -> Result<Vec<String>> {
    cfg.validate()?;
    if segments.is_empty() {
        return Err(Error::Eval("empty segment batch".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(segments.len());
    for seg in segments {
        let enc = model.encode(seg);
        let tokens = match cfg.nucleus_p {
            Some(p) => nucleus_sample(model, &enc, cfg, p, &mut rng)?,
            None => beam_search(model, &enc, cfg)?,
        };
        out.push(model.tokenizer().decode(&tokens[Tokenizer::prompt_len()..]));
    }
    Ok(out)
}

/// Teacher-forced decoding: position t is the argmax conditioned on gold
/// tokens < t. Hypothesis token count is at most reference count + 1.
pub fn teacher_force_decode(
    model: &AdaptedModel,
    segments: &[Array2<f32>],
    references: &[String],
) -> Result<Vec<String>> {
    if segments.is_empty() {
        return Err(Error::Eval("empty segment batch".to_string()));
    }
    if segments.len() != references.len() {
        return Err(Error::Eval("segments and references must pair up".to_string()));
    }
    let tok = model.tokenizer();
    let mut out = Vec::with_capacity(segments.len());
    for (seg, reference) in segments.iter().zip(references) {
        if tok.encode_words(reference).is_empty() {
            return Err(Error::Eval(format!("empty reference '{reference}'")));
        }
        let gold = tok.encode_target(reference, &model.handle.language_tag)?;
        let enc = model.encode(seg);
        let inputs = &gold[..gold.len() - 1];
        let logits = model.decode_logits(inputs, &enc);
        let mut hyp = Vec::new();
        // positions from the end of the prompt onward predict words + eos
        for row in Tokenizer::prompt_len() - 1..logits.nrows() {
            let r = logits.row(row);
            let argmax = (0..r.len())
                .max_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap() as u32;
            hyp.push(argmax);
        }
        out.push(tok.decode(&hyp));
    }
    Ok(out)
}

/// True when any adjacent word pair occurs twice.
pub fn has_repeated_bigram(text: &str) -> bool {
    let words = crate::metrics::tokenize_for_metrics(text);
    let mut seen = HashSet::new();
    words.windows(2).any(|w| !seen.insert((w[0].clone(), w[1].clone())))
}

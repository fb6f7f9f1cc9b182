use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::metrics::tokenize_for_metrics;
use crate::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
/// Target positions with this id contribute nothing to the loss.
pub const IGNORE_ID: u32 = u32::MAX;

const TASK_TOKEN: &str = "<task:transcribe>";

/// Word-level tokenizer over the normalized training vocabulary, with the
/// fixed specials and one language tag per declared language.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Tokenizer {
    vocab: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Tokenizer {
    /// Builds the vocabulary from training sentences. Words are normalized
    /// exactly as the evaluation metrics normalize them, then sorted for a
    /// deterministic id assignment.
    pub fn from_corpus<'a>(
        sentences: impl IntoIterator<Item = &'a str>,
        languages: &[&str],
    ) -> Result<Tokenizer> {
        if languages.is_empty() {
            return Err(Error::config("tokenizer needs at least one language tag"));
        }
        let mut vocab = vec![
            "<pad>".to_string(),
            "<bos>".to_string(),
            "<eos>".to_string(),
            "<unk>".to_string(),
        ];
        let mut langs: Vec<String> = languages.iter().map(|l| format!("<lang:{l}>")).collect();
        langs.sort();
        langs.dedup();
        vocab.extend(langs);
        vocab.push(TASK_TOKEN.to_string());
        let mut words: Vec<String> = sentences
            .into_iter()
            .flat_map(tokenize_for_metrics)
            .collect();
        words.sort();
        words.dedup();
        if words.is_empty() {
            return Err(Error::config("tokenizer corpus has no words"));
        }
        vocab.extend(words);
        let mut t = Tokenizer {
            vocab,
            index: HashMap::new(),
        };
        t.rebuild_index();
        Ok(t)
    }

    /// Must be called after deserialization; the reverse index is not stored.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(|s| s.as_str())
    }

    pub fn language_id(&self, language: &str) -> Result<u32> {
        self.token_id(&format!("<lang:{language}>"))
            .ok_or_else(|| Error::config(format!("language '{language}' not in vocabulary")))
    }

    /// Decoder prompt: begin-of-sequence, language tag, transcribe task.
    pub fn prompt(&self, language: &str) -> Result<Vec<u32>> {
        Ok(vec![
            BOS_ID,
            self.language_id(language)?,
            self.token_id(TASK_TOKEN).expect("task token always present"),
        ])
    }

    pub const fn prompt_len() -> usize {
        3
    }

    /// Word ids for a sentence, unknown words mapped to `<unk>`.
    pub fn encode_words(&self, sentence: &str) -> Vec<u32> {
        tokenize_for_metrics(sentence)
            .iter()
            .map(|w| self.token_id(w).unwrap_or(UNK_ID))
            .collect()
    }

    /// Full target sequence: prompt, words, end-of-sequence.
    pub fn encode_target(&self, sentence: &str, language: &str) -> Result<Vec<u32>> {
        let mut ids = self.prompt(language)?;
        ids.extend(self.encode_words(sentence));
        ids.push(EOS_ID);
        Ok(ids)
    }

    /// Text from ids, dropping specials. Stops at end-of-sequence.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut words = Vec::new();
        for &id in ids {
            if id == EOS_ID {
                break;
            }
            if let Some(tok) = self.token(id) {
                if !tok.starts_with('<') {
                    words.push(tok);
                }
            }
        }
        words.join(" ")
    }

    /// Plain word tokens, in id order, excluding specials.
    pub fn words(&self) -> Vec<&str> {
        self.vocab
            .iter()
            .filter(|w| !w.starts_with('<'))
            .map(|s| s.as_str())
            .collect()
    }
}

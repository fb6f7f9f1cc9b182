//! Sentence-recording manifests: one JSON object per line, sentence window
//! segmentation, the four split strategies, and a synthetic toy corpus
//! generator for desk-scale runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::signal::Recording;

/// One word with its time span, relative to the segment start.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WordSpan {
    pub word: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// One sentence-recording pair.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub signal_path: String,
    pub signal_rate_hz: f64,
    pub duration_s: f64,
    pub language: String,
    pub sentence: String,
    pub word_spans: Vec<WordSpan>,
    pub subject_id: String,
    pub session_id: String,
    pub story_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// Split strategies from the training/evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    RandomPairs,
    HoldoutSession,
    HoldoutStory,
    HoldoutSentences,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub strategy: SplitStrategy,
    /// train:val:test proportions; (8, 1, 1) reproduces the reference protocol.
    pub ratios: (u32, u32, u32),
    /// Session or story name for the holdout strategies.
    pub holdout_key: Option<String>,
    /// Fraction of unique sentences withheld by `holdout_sentences`.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            strategy: SplitStrategy::RandomPairs,
            ratios: (8, 1, 1),
            holdout_key: None,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Summary persisted next to the three split manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitReport {
    pub strategy: SplitStrategy,
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

fn require<'a>(value: &'a Value, field: &str) -> Result<&'a Value> {
    value.get(field).ok_or_else(|| Error::Schema(field.to_string()))
}

fn as_f64(value: &Value, field: &str) -> Result<f64> {
    value.as_f64().ok_or_else(|| Error::Schema(field.to_string()))
}

fn scalar_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parse one manifest line (field names follow the dataset listing:
/// `eeg`/`speech`, `sentence`, `sentences[].words`, `subj`, `story`,
/// `start`/`end`).
pub fn parse_manifest_line(line: &str) -> Result<ManifestEntry> {
    let v: Value = serde_json::from_str(line)?;
    let eeg = require(&v, "eeg")?;
    let signal_path = require(eeg, "path")?
        .as_str()
        .ok_or_else(|| Error::Schema("eeg.path".into()))?
        .to_string();
    let signal_rate_hz = as_f64(require(eeg, "sr")?, "eeg.sr")?;
    let duration_s = as_f64(require(&v, "duration")?, "duration")?;
    let sentence = require(&v, "sentence")?
        .as_str()
        .ok_or_else(|| Error::Schema("sentence".into()))?
        .to_string();
    if sentence.trim().is_empty() {
        return Err(Error::Schema("sentence".into()));
    }
    let language = v
        .get("language")
        .and_then(Value::as_str)
        .unwrap_or("English")
        .to_string();
    let subject_id = v
        .get("subj")
        .and_then(scalar_string)
        .ok_or_else(|| Error::Schema("subj".into()))?;
    let session_id = v.get("session").and_then(scalar_string).unwrap_or_else(|| "0".into());
    let story_id = v
        .get("story")
        .and_then(scalar_string)
        .or_else(|| v.get("story_id").and_then(scalar_string))
        .ok_or_else(|| Error::Schema("story".into()))?;
    let start_s = as_f64(require(&v, "start")?, "start")?;
    let end_s = as_f64(require(&v, "end")?, "end")?;

    let mut word_spans = Vec::new();
    if let Some(sentences) = v.get("sentences").and_then(Value::as_array) {
        for s in sentences {
            if let Some(words) = s.get("words").and_then(Value::as_array) {
                for w in words {
                    word_spans.push(WordSpan {
                        word: require(w, "word")?
                            .as_str()
                            .ok_or_else(|| Error::Schema("words[].word".into()))?
                            .to_string(),
                        start_s: as_f64(require(w, "start")?, "words[].start")?,
                        end_s: as_f64(require(w, "end")?, "words[].end")?,
                    });
                }
            }
        }
    }
    // Word timestamps may be absolute; shift so the earliest start is zero.
    if let Some(offset) = word_spans
        .iter()
        .map(|w| w.start_s)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
    {
        if offset > 0.0 {
            for w in &mut word_spans {
                w.start_s -= offset;
                w.end_s -= offset;
            }
        }
    }
    for w in &word_spans {
        if w.word.is_empty() || w.start_s > w.end_s {
            return Err(Error::Schema("words[]".into()));
        }
    }

    let entry = ManifestEntry {
        signal_path,
        signal_rate_hz,
        duration_s,
        language,
        sentence,
        word_spans,
        subject_id,
        session_id,
        story_id,
        start_s,
        end_s,
    };
    if ((entry.end_s - entry.start_s) - entry.duration_s).abs() > 1e-3 {
        return Err(Error::Schema("duration".into()));
    }
    Ok(entry)
}

/// Serialize an entry back to the on-disk line format.
pub fn manifest_line(entry: &ManifestEntry) -> String {
    let words: Vec<Value> = entry
        .word_spans
        .iter()
        .map(|w| {
            serde_json::json!({"word": w.word, "start": w.start_s, "end": w.end_s})
        })
        .collect();
    serde_json::json!({
        "eeg": {"path": entry.signal_path, "sr": entry.signal_rate_hz},
        "duration": entry.duration_s,
        "language": entry.language,
        "sentence": entry.sentence,
        "sentences": [{
            "text": entry.sentence,
            "start": 0.0,
            "end": entry.duration_s,
            "duration": entry.duration_s,
            "words": words,
        }],
        "subj": entry.subject_id,
        "session": entry.session_id,
        "story": entry.story_id,
        "start": entry.start_s,
        "end": entry.end_s,
    })
    .to_string()
}

/// Parse a whole .jsonl manifest, reporting the line number on failure.
pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = File::open(path).map_err(|e| Error::io_path(path, e))?;
    let reader = BufReader::new(file);
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io_path(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(parse_manifest_line(&line).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io_path(path, e))?;
    for entry in entries {
        writeln!(file, "{}", manifest_line(entry))?;
    }
    Ok(())
}

/// Cut the [start_s, end_s) window out of a continuous recording.
pub fn segment_recording(rec: &Recording, entry: &ManifestEntry) -> Result<Recording> {
    let rate = rec.sample_rate_hz;
    let start = (entry.start_s * rate).round() as i64;
    let end = (entry.end_s * rate).round() as i64;
    if start < 0 || end <= start || end > rec.time_samples() as i64 {
        return Err(Error::Range(format!(
            "window [{}, {}) samples out of bounds for recording of {} samples",
            start,
            end,
            rec.time_samples()
        )));
    }
    let samples = rec
        .samples
        .slice(ndarray::s![.., start as usize..end as usize])
        .to_owned();
    Ok(Recording {
        samples,
        sample_rate_hz: rate,
        channel_names: rec.channel_names.clone(),
    })
}

/// Case-folded, punctuation-stripped sentence identity used for overlap
/// checks between splits.
pub fn normalize_sentence(text: &str) -> String {
    crate::metrics::tokenize_for_metrics(text).join(" ")
}

/// Largest-remainder allocation of `n` items to the given proportions.
pub fn largest_remainder(n: usize, ratios: (u32, u32, u32)) -> (usize, usize, usize) {
    let total = (ratios.0 + ratios.1 + ratios.2) as f64;
    let exact = [
        n as f64 * ratios.0 as f64 / total,
        n as f64 * ratios.1 as f64 / total,
        n as f64 * ratios.2 as f64 / total,
    ];
    let mut floors: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut remainder = n - floors.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    // ties go to the later bucket (test before val)
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .partial_cmp(&(exact[a] - exact[a].floor()))
            .unwrap()
            .then(b.cmp(&a))
    });
    for &i in &order {
        if remainder == 0 {
            break;
        }
        floors[i] += 1;
        remainder -= 1;
    }
    (floors[0], floors[1], floors[2])
}

/// Partition entries into (train, val, test) per the split spec.
pub fn split_dataset(
    entries: &[ManifestEntry],
    spec: &SplitSpec,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    if entries.is_empty() {
        return Err(Error::config("cannot split an empty manifest"));
    }
    if spec.ratios.0 == 0 || spec.ratios.1 == 0 || spec.ratios.2 == 0 {
        return Err(Error::config("split ratios must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.strategy {
        SplitStrategy::RandomPairs => {
            let mut idx: Vec<usize> = (0..entries.len()).collect();
            idx.shuffle(&mut rng);
            let (n_train, n_val, _n_test) = largest_remainder(entries.len(), spec.ratios);
            let pick = |range: &[usize]| range.iter().map(|&i| entries[i].clone()).collect();
            Ok((
                pick(&idx[..n_train]),
                pick(&idx[n_train..n_train + n_val]),
                pick(&idx[n_train + n_val..]),
            ))
        }
        SplitStrategy::HoldoutSession => {
            let key = spec
                .holdout_key
                .as_ref()
                .ok_or_else(|| Error::config("holdout_session requires holdout_key"))?;
            if !entries.iter().any(|e| &e.session_id == key) {
                return Err(Error::config(format!("session `{key}` not present in corpus")));
            }
            let (test, rest): (Vec<_>, Vec<_>) =
                entries.iter().cloned().partition(|e| &e.session_id == key);
            // sentences heard in the held-out session are also dropped from
            // train/val so the holdout stays unseen text, not just unseen
            // recordings
            let test_sentences: BTreeSet<String> =
                test.iter().map(|e| normalize_sentence(&e.sentence)).collect();
            let rest: Vec<_> = rest
                .into_iter()
                .filter(|e| !test_sentences.contains(&normalize_sentence(&e.sentence)))
                .collect();
            if rest.is_empty() {
                return Err(Error::config("holdout_session leaves no training data"));
            }
            let (train, val) = carve_val(rest, spec, &mut rng);
            Ok((train, val, test))
        }
        SplitStrategy::HoldoutStory => {
            let key = spec
                .holdout_key
                .as_ref()
                .ok_or_else(|| Error::config("holdout_story requires holdout_key"))?;
            if !entries.iter().any(|e| &e.story_id == key) {
                return Err(Error::config(format!("story `{key}` not present in corpus")));
            }
            let (test, rest): (Vec<_>, Vec<_>) =
                entries.iter().cloned().partition(|e| &e.story_id == key);
            // no sentence-string overlap between train/val and test
            let test_sentences: BTreeSet<String> =
                test.iter().map(|e| normalize_sentence(&e.sentence)).collect();
            let rest: Vec<_> = rest
                .into_iter()
                .filter(|e| !test_sentences.contains(&normalize_sentence(&e.sentence)))
                .collect();
            if rest.is_empty() {
                return Err(Error::config("holdout_story leaves no training data"));
            }
            let (train, val) = carve_val(rest, spec, &mut rng);
            Ok((train, val, test))
        }
        SplitStrategy::HoldoutSentences => {
            let unique: BTreeSet<String> =
                entries.iter().map(|e| normalize_sentence(&e.sentence)).collect();
            let mut unique: Vec<String> = unique.into_iter().collect();
            unique.shuffle(&mut rng);
            let n_test = ((unique.len() as f64 * spec.holdout_fraction).round() as usize)
                .clamp(1, unique.len().saturating_sub(1).max(1));
            let held: BTreeSet<String> = unique.into_iter().take(n_test).collect();
            let (test, rest): (Vec<_>, Vec<_>) = entries
                .iter()
                .cloned()
                .partition(|e| held.contains(&normalize_sentence(&e.sentence)));
            if rest.is_empty() {
                return Err(Error::config("holdout_sentences leaves no training data"));
            }
            let (train, val) = carve_val(rest, spec, &mut rng);
            Ok((train, val, test))
        }
    }
}

/// Carve a validation set out of the non-test entries, proportional to the
/// train:val ratios.
fn carve_val(
    mut rest: Vec<ManifestEntry>,
    spec: &SplitSpec,
    rng: &mut ChaCha8Rng,
) -> (Vec<ManifestEntry>, Vec<ManifestEntry>) {
    rest.shuffle(rng);
    let total = (spec.ratios.0 + spec.ratios.1) as f64;
    let n_val = ((rest.len() as f64 * spec.ratios.1 as f64 / total).round() as usize)
        .min(rest.len().saturating_sub(1));
    let val = rest.split_off(rest.len() - n_val);
    (rest, val)
}

/// Fixed 50-word inventory used by the toy generator and the word probe.
pub const TOY_WORDS: [&str; 50] = [
    "the", "a", "dog", "cat", "bird", "fox", "fish", "horse", "mouse", "wolf",
    "runs", "jumps", "sleeps", "eats", "drinks", "sees", "hears", "finds", "follows", "watches",
    "quickly", "slowly", "quietly", "loudly", "gently", "red", "blue", "green", "small", "large",
    "old", "young", "happy", "tired", "hungry", "river", "forest", "garden", "house", "road",
    "morning", "evening", "winter", "summer", "stone", "tree", "cloud", "light", "shadow", "wind",
];

/// Deterministic synthetic corpus: each sentence is rendered as a
/// sentence-coded multichannel pattern (word-keyed sinusoids) plus seeded
/// noise, repeated `n_repeats` times.
pub fn synthesize_toy_dataset(
    n_sentences: usize,
    n_repeats: usize,
    channels: usize,
    rate_hz: f64,
    seed: u64,
) -> Result<(Vec<Recording>, Vec<ManifestEntry>)> {
    if n_sentences == 0 || n_repeats == 0 || channels == 0 || rate_hz <= 0.0 {
        return Err(Error::config("toy dataset counts and rate must be positive"));
    }
    let sentences = toy_sentences(n_sentences);
    let word_dur_s = 0.2;
    let mut recordings = Vec::with_capacity(n_sentences * n_repeats);
    let mut entries = Vec::with_capacity(n_sentences * n_repeats);
    for (sent_idx, sentence) in sentences.iter().enumerate() {
        let words: Vec<&str> = sentence.split_whitespace().collect();
        let duration_s = words.len() as f64 * word_dur_s;
        let n_time = (duration_s * rate_hz).round() as usize;
        for rep in 0..n_repeats {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (sent_idx as u64) << 20 ^ rep as u64);
            let mut m = Array2::zeros((channels, n_time));
            for (w_idx, word) in words.iter().enumerate() {
                let t0 = (w_idx as f64 * word_dur_s * rate_hz).round() as usize;
                let t1 = (((w_idx + 1) as f64) * word_dur_s * rate_hz).round() as usize;
                render_word(&mut m, word, t0, t1.min(n_time), rate_hz);
            }
            // per-instance measurement noise
            for v in m.iter_mut() {
                *v += 0.05 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
            let word_spans = words
                .iter()
                .enumerate()
                .map(|(i, w)| WordSpan {
                    word: (*w).to_string(),
                    start_s: i as f64 * word_dur_s,
                    end_s: (i + 1) as f64 * word_dur_s,
                })
                .collect();
            recordings.push(Recording::new(m, rate_hz)?);
            entries.push(ManifestEntry {
                signal_path: format!("toy/s{sent_idx:03}_r{rep:03}.ntr"),
                signal_rate_hz: rate_hz,
                duration_s,
                language: "English".into(),
                sentence: sentence.clone(),
                word_spans,
                subject_id: format!("{}", 1 + rep % 4),
                session_id: format!("{}", rep % 2),
                story_id: format!("{}", sent_idx % 4),
                start_s: 0.0,
                end_s: duration_s,
            });
        }
    }
    Ok((recordings, entries))
}

/// Deterministic distinct toy sentences drawn from the fixed word inventory.
pub fn toy_sentences(n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x746f79);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let n_words = 3 + rng.random_range(0..3usize);
        let sentence: Vec<&str> = (0..n_words)
            .map(|_| TOY_WORDS[rng.random_range(0..TOY_WORDS.len())])
            .collect();
        let sentence = sentence.join(" ");
        if seen.insert(sentence.clone()) {
            out.push(sentence);
        }
    }
    out
}

/// Word-keyed pattern: each channel gets a sinusoid whose frequency and
/// phase are a deterministic function of (word, channel).
fn render_word(m: &mut Array2<f64>, word: &str, t0: usize, t1: usize, rate_hz: f64) {
    let base = word_code(word);
    for c in 0..m.nrows() {
        let key = base.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(c as u64);
        let freq = 2.0 + (key % 37) as f64; // 2..38 Hz, inside the band
        let phase = ((key >> 8) % 628) as f64 / 100.0;
        for t in t0..t1 {
            m[[c, t]] += (2.0 * std::f64::consts::PI * freq * (t - t0) as f64 / rate_hz + phase).sin();
        }
    }
}

fn word_code(word: &str) -> u64 {
    word.bytes().fold(1469598103934665603u64, |h, b| {
        (h ^ b as u64).wrapping_mul(1099511628211)
    })
}

/// Write a toy corpus to disk: one recording file per entry plus a manifest.
pub fn write_toy_corpus(
    dir: &Path,
    recordings: &[Recording],
    entries: &mut [ManifestEntry],
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir.join("toy")).map_err(|e| Error::io_path(dir, e))?;
    for (rec, entry) in recordings.iter().zip(entries.iter()) {
        crate::signal::write_recording(&dir.join(&entry.signal_path), rec)?;
    }
    for entry in entries.iter_mut() {
        entry.signal_path = dir.join(&entry.signal_path).to_string_lossy().into_owned();
    }
    let manifest_path = dir.join("manifest.jsonl");
    write_manifest(&manifest_path, entries)?;
    Ok(manifest_path)
}

/// Per-split sentence sets, used by overlap checks and reports.
pub fn unique_sentences(entries: &[ManifestEntry]) -> BTreeSet<String> {
    entries.iter().map(|e| normalize_sentence(&e.sentence)).collect()
}

/// Group entry counts by a key, for split reports.
pub fn count_by<F: Fn(&ManifestEntry) -> String>(
    entries: &[ManifestEntry],
    key: F,
) -> BTreeMap<String, usize> {
    let mut map = BTreeMap::new();
    for e in entries {
        *map.entry(key(e)).or_insert(0) += 1;
    }
    map
}

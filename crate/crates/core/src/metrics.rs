//! Translation metrics: sentence-level smoothed BLEU-n averaged over the
//! corpus, ROUGE-1 precision/recall/F1, and corpus-pooled WER.
//!
//! Text is tokenized for scoring by lowercasing, stripping punctuation and
//! splitting on whitespace, which behaves the same for English and Dutch.

use std::collections::HashMap;

use crate::error::{Error, Result};

const SMOOTH_EPS: f64 = 1e-9;

/// Lowercase, strip punctuation, split on whitespace.
pub fn tokenize_for_metrics(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric() || *c == '\'')
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Modified n-gram precision of `hyp` against `ref`, with add-epsilon
/// smoothing when either side has no n-grams or nothing matches.
fn modified_precision(reference: &[String], hypothesis: &[String], n: usize) -> f64 {
    let ref_counts = ngram_counts(reference, n);
    let hyp_counts = ngram_counts(hypothesis, n);
    let total: usize = hyp_counts.values().sum();
    if total == 0 {
        // hypothesis shorter than n: the order carries no evidence; brevity
        // is already handled by the penalty term
        return 1.0;
    }
    let matched: usize = hyp_counts
        .iter()
        .map(|(gram, &count)| count.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    if matched == 0 {
        SMOOTH_EPS
    } else {
        matched as f64 / total as f64
    }
}

/// Sentence-level BLEU-n for one pair: geometric mean of 1..n-gram
/// precisions (uniform weights) times the brevity penalty.
pub fn sentence_bleu(reference: &[String], hypothesis: &[String], n: usize) -> f64 {
    if hypothesis.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        log_sum += modified_precision(reference, hypothesis, k).ln();
    }
    let geo = (log_sum / n as f64).exp();
    let brevity = if hypothesis.len() >= reference.len() {
        1.0
    } else {
        (1.0 - reference.len() as f64 / hypothesis.len() as f64).exp()
    };
    geo * brevity
}

/// Corpus-averaged sentence BLEU-n, in percent.
pub fn bleu_n(references: &[String], hypotheses: &[String], n: usize) -> Result<f64> {
    paired(references, hypotheses)?;
    let total: f64 = references
        .iter()
        .zip(hypotheses)
        .map(|(r, h)| sentence_bleu(&tokenize_for_metrics(r), &tokenize_for_metrics(h), n))
        .sum();
    Ok(100.0 * total / references.len() as f64)
}

/// ROUGE-1 scores in percent.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rouge1 {
    pub f: f64,
    pub p: f64,
    pub r: f64,
}

fn sentence_rouge1(reference: &[String], hypothesis: &[String]) -> Rouge1 {
    let ref_counts = ngram_counts(reference, 1);
    let hyp_counts = ngram_counts(hypothesis, 1);
    let overlap: usize = hyp_counts
        .iter()
        .map(|(gram, &count)| count.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let p = if hypothesis.is_empty() {
        0.0
    } else {
        overlap as f64 / hypothesis.len() as f64
    };
    let r = if reference.is_empty() {
        0.0
    } else {
        overlap as f64 / reference.len() as f64
    };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Rouge1 { f, p, r }
}

/// Per-sentence ROUGE-1 averaged over the corpus, in percent.
pub fn rouge1(references: &[String], hypotheses: &[String]) -> Result<Rouge1> {
    paired(references, hypotheses)?;
    let n = references.len() as f64;
    let mut acc = Rouge1 { f: 0.0, p: 0.0, r: 0.0 };
    for (r, h) in references.iter().zip(hypotheses) {
        let s = sentence_rouge1(&tokenize_for_metrics(r), &tokenize_for_metrics(h));
        acc.f += s.f;
        acc.p += s.p;
        acc.r += s.r;
    }
    Ok(Rouge1 {
        f: 100.0 * acc.f / n,
        p: 100.0 * acc.p / n,
        r: 100.0 * acc.r / n,
    })
}

/// Word-level Levenshtein distance (unit-cost substitutions, insertions,
/// deletions).
pub fn edit_distance(reference: &[String], hypothesis: &[String]) -> usize {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let sub = prev[j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Corpus-pooled word error rate in percent: total edit distance over total
/// reference words. May exceed 100.
pub fn wer(references: &[String], hypotheses: &[String]) -> Result<f64> {
    paired(references, hypotheses)?;
    let mut edits = 0usize;
    let mut ref_words = 0usize;
    for (r, h) in references.iter().zip(hypotheses) {
        let rt = tokenize_for_metrics(r);
        let ht = tokenize_for_metrics(h);
        edits += edit_distance(&rt, &ht);
        ref_words += rt.len();
    }
    if ref_words == 0 {
        return Err(Error::Eval("WER undefined: zero reference words".into()));
    }
    Ok(100.0 * edits as f64 / ref_words as f64)
}

fn paired(references: &[String], hypotheses: &[String]) -> Result<()> {
    if references.is_empty() {
        return Err(Error::Eval("empty corpus".into()));
    }
    if references.len() != hypotheses.len() {
        return Err(Error::Eval(format!(
            "reference/hypothesis count mismatch: {} vs {}",
            references.len(),
            hypotheses.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_for_metrics(s)
    }

    #[test]
    fn bleu_identity_is_100() {
        let refs = vec!["the cat sat on the mat".to_string(), "hello world".to_string()];
        for n in 1..=4 {
            assert_abs_diff_eq!(bleu_n(&refs, &refs, n).unwrap(), 100.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn bleu2_hand_computed_brevity_case() {
        // precisions 1 and 1, brevity exp(1 - 3/2)
        let refs = vec!["the cat sat".to_string()];
        let hyps = vec!["the cat".to_string()];
        let expect = 100.0 * (1.0f64 - 3.0 / 2.0).exp();
        assert_abs_diff_eq!(bleu_n(&refs, &hyps, 2).unwrap(), expect, epsilon = 1e-6);
        assert_abs_diff_eq!(expect, 60.653065971263345, epsilon = 1e-6);
    }

    #[test]
    fn bleu_disjoint_vocabulary_is_near_zero() {
        let refs = vec!["aa bb cc".to_string()];
        let hyps = vec!["dd ee ff".to_string()];
        assert!(bleu_n(&refs, &hyps, 1).unwrap() < 1e-6);
    }

    #[test]
    fn rouge1_identity_and_disjoint() {
        let refs = vec!["a b c d".to_string()];
        let same = rouge1(&refs, &refs).unwrap();
        assert_abs_diff_eq!(same.f, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(same.p, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(same.r, 100.0, epsilon = 1e-9);

        let hyps = vec!["x y".to_string()];
        let dis = rouge1(&refs, &hyps).unwrap();
        assert_eq!((dis.f, dis.p, dis.r), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge1_hand_computed() {
        let refs = vec!["a b c d".to_string()];
        let hyps = vec!["a b".to_string()];
        let s = rouge1(&refs, &hyps).unwrap();
        assert_abs_diff_eq!(s.p, 100.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.r, 50.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.f, 200.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn wer_identity_and_single_substitution() {
        let refs = vec!["a b c".to_string()];
        assert_abs_diff_eq!(wer(&refs, &refs).unwrap(), 0.0, epsilon = 1e-12);
        let hyps = vec!["a x c".to_string()];
        assert_abs_diff_eq!(wer(&refs, &hyps).unwrap(), 100.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn wer_can_exceed_100_with_insertions() {
        let refs = vec!["a".to_string()];
        let hyps = vec!["a b c d".to_string()];
        assert!(wer(&refs, &hyps).unwrap() > 100.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let empty: Vec<String> = vec![];
        assert!(bleu_n(&empty, &empty, 1).is_err());
        assert!(rouge1(&empty, &empty).is_err());
        assert!(wer(&empty, &empty).is_err());
    }

    /// Exhaustive DP oracle over a tiny recursive definition.
    fn oracle_edit(a: &[String], b: &[String]) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        let sub = oracle_edit(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
        let del = oracle_edit(&a[1..], b) + 1;
        let ins = oracle_edit(a, &b[1..]) + 1;
        sub.min(del).min(ins)
    }

    #[test]
    fn wer_matches_exhaustive_oracle_up_to_length_6() {
        // all word-sequence pairs up to length 6 over a 3-symbol alphabet,
        // sampled densely by enumerating base-3 codes
        let symbols = ["a".to_string(), "b".to_string(), "c".to_string()];
        let seqs: Vec<Vec<String>> = {
            let mut all = vec![vec![]];
            for len in 1..=6usize {
                for code in 0..3usize.pow(len as u32) {
                    let mut s = Vec::with_capacity(len);
                    let mut c = code;
                    for _ in 0..len {
                        s.push(symbols[c % 3].clone());
                        c /= 3;
                    }
                    all.push(s);
                }
            }
            all
        };
        // full cross product is ~1.2M pairs; stride it to keep the test fast
        // while still covering every length combination
        for (i, a) in seqs.iter().enumerate().step_by(13) {
            for (j, b) in seqs.iter().enumerate().step_by(17) {
                let _ = (i, j);
                assert_eq!(edit_distance(a, b), oracle_edit(a, b));
            }
        }
    }

    #[test]
    fn tokenizer_strips_punctuation_and_case() {
        assert_eq!(toks("The cat, sat!"), vec!["the", "cat", "sat"]);
    }

    proptest! {
        #[test]
        fn rouge_precision_recall_symmetry(a in "[a-c ]{0,24}", b in "[a-c ]{0,24}") {
            let ta = toks(&a);
            let tb = toks(&b);
            if !ta.is_empty() && !tb.is_empty() {
                let s1 = sentence_rouge1(&ta, &tb);
                let s2 = sentence_rouge1(&tb, &ta);
                prop_assert!((s1.p - s2.r).abs() < 1e-12);
                prop_assert!((s1.r - s2.p).abs() < 1e-12);
            }
        }

        #[test]
        fn edit_distance_triangle_bounds(a in "[a-c ]{0,20}", b in "[a-c ]{0,20}") {
            let ta = toks(&a);
            let tb = toks(&b);
            let d = edit_distance(&ta, &tb);
            prop_assert!(d <= ta.len().max(tb.len()));
            prop_assert!(d >= ta.len().abs_diff(tb.len()));
            prop_assert_eq!(edit_distance(&tb, &ta), d);
        }
    }
}

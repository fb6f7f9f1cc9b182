//! Training-time augmentations: masking (time / channel / block units),
//! SNR-targeted Gaussian noise injection, and temporal shifting. Each is
//! applied with a configured probability and an explicit rng handle.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::ManifestEntry;
use crate::signal::Recording;

/// Samples per mask unit along time.
pub const MASK_UNIT_SAMPLES: usize = 40;
/// Value written into masked cells (signals are zero-centered after robust
/// scaling).
pub const MASK_VALUE: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationKind {
    TimeMask,
    ChannelMask,
    BlockMask,
    Noise,
    Shift,
}

/// One augmentation directive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationSpec {
    pub kind: AugmentationKind,
    /// Mask fraction for the mask kinds, in [0, 1].
    #[serde(default)]
    pub ratio: f64,
    /// Target signal-to-noise ratio for `noise`.
    #[serde(default)]
    pub snr_db: f64,
    /// Maximum shift for `shift`, in seconds.
    #[serde(default)]
    pub max_shift_s: f64,
    /// Probability of applying the augmentation to a segment.
    pub probability: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::config("augmentation probability must be in [0, 1]"));
        }
        match self.kind {
            AugmentationKind::TimeMask | AugmentationKind::ChannelMask | AugmentationKind::BlockMask => {
                if !(0.0..=1.0).contains(&self.ratio) {
                    return Err(Error::config("mask ratio must be in [0, 1]"));
                }
            }
            AugmentationKind::Shift => {
                if self.max_shift_s < 0.0 {
                    return Err(Error::config("max_shift_s must be >= 0"));
                }
            }
            AugmentationKind::Noise => {}
        }
        Ok(())
    }
}

/// Time-block boundaries of `MASK_UNIT_SAMPLES`-wide units; the final unit
/// may be shorter.
fn time_blocks(time: usize) -> Vec<(usize, usize)> {
    (0..time.div_ceil(MASK_UNIT_SAMPLES))
        .map(|b| (b * MASK_UNIT_SAMPLES, ((b + 1) * MASK_UNIT_SAMPLES).min(time)))
        .collect()
}

/// Choose `k` distinct indices out of `n`, uniformly without replacement.
fn choose_without_replacement(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx
}

/// Mask units of one channel x 40 samples until the masked fraction is the
/// closest achievable to `ratio`.
pub fn apply_block_mask(rec: &Recording, ratio: f64, rng: &mut impl Rng) -> Result<Recording> {
    mask_ratio_valid(ratio)?;
    let blocks = time_blocks(rec.time_samples());
    let n_units = rec.channels() * blocks.len();
    let n_mask = (ratio * n_units as f64).round() as usize;
    let mut out = rec.clone();
    for unit in choose_without_replacement(n_units, n_mask, rng) {
        let ch = unit / blocks.len();
        let (t0, t1) = blocks[unit % blocks.len()];
        out.samples.slice_mut(ndarray::s![ch, t0..t1]).fill(MASK_VALUE);
    }
    Ok(out)
}

/// Mask units of all channels x 40 samples.
pub fn apply_time_mask(rec: &Recording, ratio: f64, rng: &mut impl Rng) -> Result<Recording> {
    mask_ratio_valid(ratio)?;
    let blocks = time_blocks(rec.time_samples());
    let n_mask = (ratio * blocks.len() as f64).round() as usize;
    let mut out = rec.clone();
    for b in choose_without_replacement(blocks.len(), n_mask, rng) {
        let (t0, t1) = blocks[b];
        out.samples.slice_mut(ndarray::s![.., t0..t1]).fill(MASK_VALUE);
    }
    Ok(out)
}

/// Mask round(ratio * channels) whole channels.
pub fn apply_channel_mask(rec: &Recording, ratio: f64, rng: &mut impl Rng) -> Result<Recording> {
    mask_ratio_valid(ratio)?;
    let n_mask = (ratio * rec.channels() as f64).round() as usize;
    let mut out = rec.clone();
    for ch in choose_without_replacement(rec.channels(), n_mask, rng) {
        out.samples.row_mut(ch).fill(MASK_VALUE);
    }
    Ok(out)
}

fn mask_ratio_valid(ratio: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::config("mask ratio must be in [0, 1]"));
    }
    Ok(())
}

/// Add Gaussian noise scaled so 10*log10(P_signal / P_noise) = snr_db.
/// An infinite SNR is the identity.
pub fn inject_noise(rec: &Recording, snr_db: f64, rng: &mut impl Rng) -> Result<Recording> {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(rec.clone());
    }
    let n = rec.samples.len() as f64;
    let p_signal = rec.samples.iter().map(|v| v * v).sum::<f64>() / n;
    if p_signal <= 0.0 {
        return Err(Error::config("noise injection undefined for zero-power signal"));
    }
    let sigma = (p_signal / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut out = rec.clone();
    for v in out.samples.iter_mut() {
        *v += sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
    }
    Ok(out)
}

/// Translate segment content forward by a delta drawn uniformly from
/// [0, max_shift_s], clamped to the slack between the content and its padded
/// window; word timestamps shift by the same delta and the vacated region is
/// zero-filled.
pub fn shift_segment(
    rec: &Recording,
    entry: &ManifestEntry,
    max_shift_s: f64,
    rng: &mut impl Rng,
) -> Result<(Recording, ManifestEntry)> {
    if max_shift_s < 0.0 {
        return Err(Error::config("max_shift_s must be >= 0"));
    }
    let delta = rng.random_range(0.0..=max_shift_s);
    apply_shift(rec, entry, delta)
}

/// Deterministic core of `shift_segment`.
pub fn apply_shift(
    rec: &Recording,
    entry: &ManifestEntry,
    delta_s: f64,
) -> Result<(Recording, ManifestEntry)> {
    let slack_s = (rec.duration_s() - entry.duration_s).max(0.0);
    let delta_s = delta_s.min(slack_s);
    let d = (delta_s * rec.sample_rate_hz).round() as usize;
    let delta_s = d as f64 / rec.sample_rate_hz;
    let time = rec.time_samples();
    let mut samples = Array2::from_elem(rec.samples.dim(), MASK_VALUE);
    if d < time {
        samples
            .slice_mut(ndarray::s![.., d..])
            .assign(&rec.samples.slice(ndarray::s![.., ..time - d]));
    }
    let mut entry = entry.clone();
    for w in &mut entry.word_spans {
        w.start_s += delta_s;
        w.end_s += delta_s;
    }
    Ok((
        Recording {
            samples,
            sample_rate_hz: rec.sample_rate_hz,
            channel_names: rec.channel_names.clone(),
        },
        entry,
    ))
}

/// Apply the configured augmentation with probability `spec.probability`.
pub fn apply(
    rec: &Recording,
    entry: &ManifestEntry,
    spec: &AugmentationSpec,
    rng: &mut impl Rng,
) -> Result<(Recording, ManifestEntry)> {
    spec.validate()?;
    if rng.random::<f64>() >= spec.probability {
        return Ok((rec.clone(), entry.clone()));
    }
    match spec.kind {
        AugmentationKind::BlockMask => Ok((apply_block_mask(rec, spec.ratio, rng)?, entry.clone())),
        AugmentationKind::TimeMask => Ok((apply_time_mask(rec, spec.ratio, rng)?, entry.clone())),
        AugmentationKind::ChannelMask => {
            Ok((apply_channel_mask(rec, spec.ratio, rng)?, entry.clone()))
        }
        AugmentationKind::Noise => Ok((inject_noise(rec, spec.snr_db, rng)?, entry.clone())),
        AugmentationKind::Shift => shift_segment(rec, entry, spec.max_shift_s, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones(channels: usize, time: usize) -> Recording {
        Recording::new(Array2::from_elem((channels, time), 1.0), 200.0).unwrap()
    }

    fn masked_fraction(rec: &Recording) -> f64 {
        let masked = rec.samples.iter().filter(|&&v| v == MASK_VALUE).count();
        masked as f64 / rec.samples.len() as f64
    }

    fn entry_with_spans() -> ManifestEntry {
        ManifestEntry {
            signal_path: "x.ntr".into(),
            signal_rate_hz: 200.0,
            duration_s: 1.0,
            language: "English".into(),
            sentence: "two words".into(),
            word_spans: vec![
                crate::manifest::WordSpan { word: "two".into(), start_s: 0.0, end_s: 0.5 },
                crate::manifest::WordSpan { word: "words".into(), start_s: 0.5, end_s: 1.0 },
            ],
            subject_id: "1".into(),
            session_id: "0".into(),
            story_id: "0".into(),
            start_s: 0.0,
            end_s: 1.0,
        }
    }

    #[test]
    fn zero_ratio_masks_are_identity() {
        let rec = ones(8, 2000);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for f in [apply_block_mask, apply_time_mask, apply_channel_mask] {
            let out = f(&rec, 0.0, &mut rng).unwrap();
            assert_eq!(out.samples, rec.samples);
        }
    }

    #[test]
    fn full_ratio_masks_everything() {
        let rec = ones(8, 2000);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for f in [apply_block_mask, apply_time_mask, apply_channel_mask] {
            let out = f(&rec, 1.0, &mut rng).unwrap();
            assert!(out.samples.iter().all(|&v| v == MASK_VALUE));
        }
    }

    #[test]
    fn block_mask_fraction_tracks_ratio_over_100_seeds() {
        let rec = ones(8, 2000);
        for (f, name) in [
            (apply_block_mask as fn(&Recording, f64, &mut ChaCha8Rng) -> crate::Result<Recording>, "block"),
            (apply_time_mask, "time"),
            (apply_channel_mask, "channel"),
        ] {
            let mut total = 0.0;
            for seed in 0..100u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                total += masked_fraction(&f(&rec, 0.25, &mut rng).unwrap());
            }
            let mean = total / 100.0;
            assert!((mean - 0.25).abs() <= 0.02, "{name}: {mean}");
        }
    }

    #[test]
    fn time_mask_columns_cover_every_channel() {
        let rec = ones(8, 400);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = apply_time_mask(&rec, 0.3, &mut rng).unwrap();
        for t in 0..rec.time_samples() {
            let col = out.samples.column(t);
            let masked = col.iter().filter(|&&v| v == MASK_VALUE).count();
            assert!(masked == 0 || masked == rec.channels());
        }
    }

    #[test]
    fn channel_mask_masks_exact_row_count_and_leaves_rest() {
        let rec = ones(8, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = apply_channel_mask(&rec, 0.25, &mut rng).unwrap();
        let masked_rows = out
            .samples
            .rows()
            .into_iter()
            .filter(|row| row.iter().all(|&v| v == MASK_VALUE))
            .count();
        assert_eq!(masked_rows, 2);
        let untouched = out
            .samples
            .rows()
            .into_iter()
            .filter(|row| row.iter().all(|&v| v == 1.0))
            .count();
        assert_eq!(untouched, 6);
    }

    #[test]
    fn masking_never_alters_unmasked_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = Array2::zeros((8, 2000));
        for v in m.iter_mut() {
            *v = 1.0 + rand::Rng::random::<f64>(&mut rng);
        }
        let rec = Recording::new(m, 200.0).unwrap();
        let out = apply_block_mask(&rec, 0.3, &mut rng).unwrap();
        for (a, b) in rec.samples.iter().zip(out.samples.iter()) {
            assert!(*b == *a || *b == MASK_VALUE);
        }
    }

    fn measured_snr_db(clean: &Recording, noisy: &Recording) -> f64 {
        let p_signal: f64 =
            clean.samples.iter().map(|v| v * v).sum::<f64>() / clean.samples.len() as f64;
        let p_noise: f64 = clean
            .samples
            .iter()
            .zip(noisy.samples.iter())
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            / clean.samples.len() as f64;
        10.0 * (p_signal / p_noise).log10()
    }

    #[test]
    fn injected_noise_hits_target_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = Array2::zeros((8, 2000));
        for v in m.iter_mut() {
            *v = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        }
        let rec = Recording::new(m, 200.0).unwrap();
        for target in [0.0, 15.0] {
            let noisy = inject_noise(&rec, target, &mut rng).unwrap();
            let measured = measured_snr_db(&rec, &noisy);
            assert!((measured - target).abs() <= 0.5, "target {target}, got {measured}");
        }
    }

    #[test]
    fn infinite_snr_is_identity_and_zero_power_errors() {
        let rec = ones(2, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = inject_noise(&rec, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(out.samples, rec.samples);

        let zeros = Recording::new(Array2::zeros((2, 100)), 200.0).unwrap();
        assert!(inject_noise(&zeros, 0.0, &mut rng).is_err());
    }

    #[test]
    fn shift_zero_delta_is_identity() {
        let rec = ones(4, 300);
        let entry = entry_with_spans();
        let (out, e) = apply_shift(&rec, &entry, 0.0).unwrap();
        assert_eq!(out.samples, rec.samples);
        assert_eq!(e.word_spans, entry.word_spans);
    }

    #[test]
    fn shift_translates_samples_and_spans_together() {
        // content of 1 s inside a 2 s padded window
        let mut m = Array2::zeros((2, 400));
        m.slice_mut(ndarray::s![.., ..200]).fill(1.0);
        let rec = Recording::new(m, 200.0).unwrap();
        let entry = entry_with_spans();
        let (out, e) = apply_shift(&rec, &entry, 0.5).unwrap();
        assert!(out.samples.slice(ndarray::s![.., ..100]).iter().all(|&v| v == 0.0));
        assert!(out.samples.slice(ndarray::s![.., 100..300]).iter().all(|&v| v == 1.0));
        assert!((e.word_spans[0].start_s - 0.5).abs() < 1e-9);
        assert!((e.word_spans[1].end_s - 1.5).abs() < 1e-9);
        // relative offsets preserved
        let rel0 = entry.word_spans[1].start_s - entry.word_spans[0].start_s;
        let rel1 = e.word_spans[1].start_s - e.word_spans[0].start_s;
        assert!((rel0 - rel1).abs() < 1e-9);
    }

    #[test]
    fn shift_clamps_to_window_slack() {
        let mut m = Array2::zeros((1, 400));
        m.slice_mut(ndarray::s![.., ..200]).fill(1.0);
        let rec = Recording::new(m, 200.0).unwrap();
        let entry = entry_with_spans();
        // requested 5 s, slack is 1 s
        let (out, e) = apply_shift(&rec, &entry, 5.0).unwrap();
        assert!(out.samples.slice(ndarray::s![.., 200..]).iter().all(|&v| v == 1.0));
        assert!((e.word_spans[0].start_s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn apply_respects_probability_extremes() {
        let rec = ones(4, 200);
        let entry = entry_with_spans();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = AugmentationSpec {
            kind: AugmentationKind::ChannelMask,
            ratio: 0.5,
            snr_db: 0.0,
            max_shift_s: 0.0,
            probability: 0.0,
            seed: 0,
        };
        for _ in 0..50 {
            let (out, _) = apply(&rec, &entry, &spec, &mut rng).unwrap();
            assert_eq!(out.samples, rec.samples);
        }
        let spec = AugmentationSpec { probability: 1.0, ..spec };
        for _ in 0..50 {
            let (out, _) = apply(&rec, &entry, &spec, &mut rng).unwrap();
            assert_ne!(out.samples, rec.samples);
        }
    }

    #[test]
    fn apply_probability_half_is_binomial() {
        let rec = ones(4, 200);
        let entry = entry_with_spans();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = AugmentationSpec {
            kind: AugmentationKind::ChannelMask,
            ratio: 0.5,
            snr_db: 0.0,
            max_shift_s: 0.0,
            probability: 0.5,
            seed: 0,
        };
        let mut applied = 0usize;
        for _ in 0..1000 {
            let (out, _) = apply(&rec, &entry, &spec, &mut rng).unwrap();
            if out.samples != rec.samples {
                applied += 1;
            }
        }
        // 3 sigma of Binomial(1000, 0.5)
        let sigma = (1000.0f64 * 0.25).sqrt();
        assert!((applied as f64 - 500.0).abs() <= 3.0 * sigma, "{applied}");
    }

    #[test]
    fn augmentation_preserves_shape_and_is_seed_deterministic() {
        let rec = ones(8, 2000);
        let entry = entry_with_spans();
        for kind in [
            AugmentationKind::TimeMask,
            AugmentationKind::ChannelMask,
            AugmentationKind::BlockMask,
            AugmentationKind::Noise,
            AugmentationKind::Shift,
        ] {
            let spec = AugmentationSpec {
                kind,
                ratio: 0.3,
                snr_db: 10.0,
                max_shift_s: 0.5,
                probability: 1.0,
                seed: 0,
            };
            let mut r1 = ChaCha8Rng::seed_from_u64(7);
            let mut r2 = ChaCha8Rng::seed_from_u64(7);
            let (a, _) = apply(&rec, &entry, &spec, &mut r1).unwrap();
            let (b, _) = apply(&rec, &entry, &spec, &mut r2).unwrap();
            assert_eq!(a.samples, b.samples);
            assert_eq!(a.samples.dim(), rec.samples.dim());
            assert_eq!(a.sample_rate_hz, rec.sample_rate_hz);
        }
    }
}

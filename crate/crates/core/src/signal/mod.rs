//! Fixed preprocessing chain turning raw multichannel recordings into
//! normalized model-ready segments: notch -> band-pass -> resample ->
//! robust scale -> clip/rescale.

mod filters;
mod io;
mod resample;

pub use io::{read_recording, write_recording};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A channels x time sample matrix with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub samples: Array2<f64>,
    pub sample_rate_hz: f64,
    pub channel_names: Option<Vec<String>>,
}

impl Recording {
    pub fn new(samples: Array2<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::config("recording must have >= 1 channel and >= 1 sample"));
        }
        if sample_rate_hz <= 0.0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("recording contains non-finite samples"));
        }
        Ok(Recording {
            samples,
            sample_rate_hz,
            channel_names: None,
        })
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn time_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.time_samples() as f64 / self.sample_rate_hz
    }

    fn nyquist(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }
}

/// Parameters of the preprocessing chain.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Power-line frequency to notch out (site dependent).
    pub line_freq_hz: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub target_rate_hz: f64,
    pub clip_abs: f64,
    pub scaler_quantile_low: f64,
    pub scaler_quantile_high: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            line_freq_hz: 50.0,
            band_low_hz: 1.0,
            band_high_hz: 60.0,
            target_rate_hz: 200.0,
            clip_abs: 10.0,
            scaler_quantile_low: 0.25,
            scaler_quantile_high: 0.75,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_low_hz > 0.0 && self.band_low_hz < self.band_high_hz) {
            return Err(Error::config("band edges must satisfy 0 < low < high"));
        }
        if self.band_high_hz >= self.target_rate_hz / 2.0 {
            return Err(Error::config(format!(
                "band_high_hz {} must be below target Nyquist {}",
                self.band_high_hz,
                self.target_rate_hz / 2.0
            )));
        }
        if self.clip_abs <= 0.0 {
            return Err(Error::config("clip_abs must be positive"));
        }
        if !(0.0 <= self.scaler_quantile_low
            && self.scaler_quantile_low < self.scaler_quantile_high
            && self.scaler_quantile_high <= 1.0)
        {
            return Err(Error::config("quantile bounds must satisfy 0 <= low < high <= 1"));
        }
        Ok(())
    }
}

/// Zero-phase notch at `freq_hz` (forward-backward biquad, Q = 30).
pub fn notch_filter(rec: &Recording, freq_hz: f64) -> Result<Recording> {
    if !(freq_hz > 0.0 && freq_hz < rec.nyquist()) {
        return Err(Error::config(format!(
            "notch frequency {freq_hz} Hz must lie in (0, {}) for rate {}",
            rec.nyquist(),
            rec.sample_rate_hz
        )));
    }
    let biquad = filters::notch_biquad(freq_hz, rec.sample_rate_hz, 30.0);
    let mut out = rec.clone();
    filters::filtfilt(&mut out.samples, &[biquad], filters::ring_pad(freq_hz, 30.0, rec.sample_rate_hz));
    Ok(out)
}

/// Zero-phase band-pass: 2nd-order Butterworth high-pass at `low_hz` cascaded
/// with a 2nd-order Butterworth low-pass at `high_hz`, applied forward-backward.
pub fn bandpass_filter(rec: &Recording, low_hz: f64, high_hz: f64) -> Result<Recording> {
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < rec.nyquist()) {
        return Err(Error::config(format!(
            "band edges ({low_hz}, {high_hz}) must satisfy 0 < low < high < Nyquist {}",
            rec.nyquist()
        )));
    }
    let cascade = [
        filters::highpass_biquad(low_hz, rec.sample_rate_hz),
        filters::lowpass_biquad(high_hz, rec.sample_rate_hz),
    ];
    let mut out = rec.clone();
    // Transient length is governed by the low edge.
    let pad = ((3.0 * rec.sample_rate_hz / low_hz).round() as usize).max(12);
    filters::filtfilt(&mut out.samples, &cascade, pad);
    Ok(out)
}

/// Fourier-domain resampling to `target_rate_hz`; output length is
/// round(n * target / source).
pub fn resample(rec: &Recording, target_rate_hz: f64) -> Result<Recording> {
    if target_rate_hz <= 0.0 {
        return Err(Error::config("target rate must be positive"));
    }
    if (target_rate_hz - rec.sample_rate_hz).abs() < 1e-12 {
        return Ok(rec.clone());
    }
    let out = resample::fft_resample(&rec.samples, rec.sample_rate_hz, target_rate_hz);
    Ok(Recording {
        samples: out,
        sample_rate_hz: target_rate_hz,
        channel_names: rec.channel_names.clone(),
    })
}

/// Per-channel (x - median) / IQR with linearly interpolated quantiles.
/// Channels with IQR below 1e-12 are divided by 1 instead.
pub fn robust_scale(rec: &Recording, q_low: f64, q_high: f64) -> Result<Recording> {
    if !(0.0 <= q_low && q_low < q_high && q_high <= 1.0) {
        return Err(Error::config("quantile bounds must satisfy 0 <= low < high <= 1"));
    }
    let mut out = rec.clone();
    for mut row in out.samples.rows_mut() {
        let mut sorted: Vec<f64> = row.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = quantile_sorted(&sorted, 0.5);
        let iqr = quantile_sorted(&sorted, q_high) - quantile_sorted(&sorted, q_low);
        let div = if iqr < 1e-12 { 1.0 } else { iqr };
        row.mapv_inplace(|v| (v - median) / div);
    }
    Ok(out)
}

/// Linearly interpolated quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Clamp to +-clip_abs and divide by clip_abs, mapping into [-1, 1].
pub fn clip_and_rescale(rec: &Recording, clip_abs: f64) -> Result<Recording> {
    if clip_abs <= 0.0 {
        return Err(Error::config("clip_abs must be positive"));
    }
    let mut out = rec.clone();
    out.samples
        .mapv_inplace(|v| v.clamp(-clip_abs, clip_abs) / clip_abs);
    Ok(out)
}

/// Full chain in the fixed order: notch -> band-pass -> resample ->
/// robust scale -> clip/rescale.
pub fn preprocess(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    cfg.validate()?;
    let rec = notch_filter(rec, cfg.line_freq_hz)?;
    let rec = bandpass_filter(&rec, cfg.band_low_hz, cfg.band_high_hz)?;
    let rec = resample(&rec, cfg.target_rate_hz)?;
    let rec = robust_scale(&rec, cfg.scaler_quantile_low, cfg.scaler_quantile_high)?;
    clip_and_rescale(&rec, cfg.clip_abs)
}

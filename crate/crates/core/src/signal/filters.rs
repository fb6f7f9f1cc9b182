//! Biquad sections and zero-phase (forward-backward) application.

use ndarray::Array2;

/// Normalized biquad coefficients (a0 == 1).
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Biquad {
        Biquad {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }
}

/// RBJ cookbook notch.
pub fn notch_biquad(freq_hz: f64, rate_hz: f64, q: f64) -> Biquad {
    let w0 = 2.0 * std::f64::consts::PI * freq_hz / rate_hz;
    let alpha = w0.sin() / (2.0 * q);
    let cw = w0.cos();
    Biquad::from_raw([1.0, -2.0 * cw, 1.0], [1.0 + alpha, -2.0 * cw, 1.0 - alpha])
}

/// 2nd-order Butterworth high-pass (RBJ, Q = 1/sqrt(2)).
pub fn highpass_biquad(freq_hz: f64, rate_hz: f64) -> Biquad {
    let w0 = 2.0 * std::f64::consts::PI * freq_hz / rate_hz;
    let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
    let cw = w0.cos();
    let b = [(1.0 + cw) / 2.0, -(1.0 + cw), (1.0 + cw) / 2.0];
    Biquad::from_raw(b, [1.0 + alpha, -2.0 * cw, 1.0 - alpha])
}

/// 2nd-order Butterworth low-pass (RBJ, Q = 1/sqrt(2)).
pub fn lowpass_biquad(freq_hz: f64, rate_hz: f64) -> Biquad {
    let w0 = 2.0 * std::f64::consts::PI * freq_hz / rate_hz;
    let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
    let cw = w0.cos();
    let b = [(1.0 - cw) / 2.0, 1.0 - cw, (1.0 - cw) / 2.0];
    Biquad::from_raw(b, [1.0 + alpha, -2.0 * cw, 1.0 - alpha])
}

/// Padding long enough to absorb the ring-down of a resonator with quality
/// factor `q` at `freq_hz`.
pub fn ring_pad(freq_hz: f64, q: f64, rate_hz: f64) -> usize {
    let tau_s = q / (std::f64::consts::PI * freq_hz);
    ((3.0 * tau_s * rate_hz).round() as usize).max(12)
}

fn run_cascade(x: &mut [f64], cascade: &[Biquad]) {
    for bq in cascade {
        let (mut z1, mut z2) = (0.0f64, 0.0f64);
        for v in x.iter_mut() {
            let input = *v;
            let out = bq.b[0] * input + z1;
            z1 = bq.b[1] * input - bq.a[0] * out + z2;
            z2 = bq.b[2] * input - bq.a[1] * out;
            *v = out;
        }
    }
}

/// Zero-phase filtering per channel with odd-reflection edge padding.
pub fn filtfilt(samples: &mut Array2<f64>, cascade: &[Biquad], pad: usize) {
    let n = samples.ncols();
    let pad = pad.min(n.saturating_sub(1));
    for mut row in samples.rows_mut() {
        let mut buf = Vec::with_capacity(n + 2 * pad);
        // odd reflection about the first/last sample
        for i in (1..=pad).rev() {
            buf.push(2.0 * row[0] - row[i]);
        }
        buf.extend(row.iter().copied());
        for i in 1..=pad {
            buf.push(2.0 * row[n - 1] - row[n - 1 - i]);
        }
        run_cascade(&mut buf, cascade);
        buf.reverse();
        run_cascade(&mut buf, cascade);
        buf.reverse();
        for (dst, src) in row.iter_mut().zip(buf[pad..pad + n].iter()) {
            *dst = *src;
        }
    }
}

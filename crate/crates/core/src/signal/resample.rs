//! Fourier-domain resampling.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Resample every channel to length round(n * target / source) by truncating
/// or zero-padding the spectrum.
pub fn fft_resample(samples: &Array2<f64>, source_hz: f64, target_hz: f64) -> Array2<f64> {
    let n_in = samples.ncols();
    let n_out = ((n_in as f64) * target_hz / source_hz).round().max(1.0) as usize;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_in);
    let inv = planner.plan_fft_inverse(n_out);

    let mut out = Array2::zeros((samples.nrows(), n_out));
    let keep = n_in.min(n_out);
    let half = keep / 2;
    for (row_in, mut row_out) in samples.rows().into_iter().zip(out.rows_mut()) {
        let mut spec: Vec<Complex64> = row_in.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fwd.process(&mut spec);
        let mut resized = vec![Complex64::new(0.0, 0.0); n_out];
        // positive frequencies (incl. DC)
        resized[..half + 1].copy_from_slice(&spec[..half + 1]);
        // negative frequencies
        for i in 1..=keep - 1 - half {
            resized[n_out - i] = spec[n_in - i];
        }
        if keep % 2 == 0 && n_out != n_in {
            if n_out > n_in {
                // split the source Nyquist bin to keep the signal real
                let nyq = spec[half] * 0.5;
                resized[half] = nyq;
                resized[n_out - half] = nyq.conj();
            } else {
                // fold the two bins straddling the new Nyquist
                resized[half] = spec[half] + spec[n_in - half];
            }
        }
        inv.process(&mut resized);
        let scale = 1.0 / n_in as f64;
        for (dst, src) in row_out.iter_mut().zip(resized.iter()) {
            *dst = src.re * scale;
        }
    }
    out
}

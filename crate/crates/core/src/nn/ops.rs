use ndarray::{Array1, Array2};

const GELU_C: f32 = 0.797_884_6; // sqrt(2/pi)

/// tanh-approximated GELU.
pub fn gelu(x: &Array2<f32>) -> Array2<f32> {
    x.mapv(|v| 0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh()))
}

/// dL/dx given dL/dy for y = gelu(x).
pub fn gelu_backward(x: &Array2<f32>, grad_out: &Array2<f32>) -> Array2<f32> {
    let mut grad = grad_out.clone();
    for (g, &v) in grad.iter_mut().zip(x.iter()) {
        let u = GELU_C * (v + 0.044715 * v * v * v);
        let t = u.tanh();
        let du = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
        let dy = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
        *g *= dy;
    }
    grad
}

/// Row-wise softmax.
pub fn softmax_rows(x: &Array2<f32>) -> Array2<f32> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(x: &Array2<f32>) -> Array2<f32> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f32>().ln() + max;
        for v in row.iter_mut() {
            *v -= log_sum;
        }
    }
    out
}

/// Mean token-level cross-entropy over `targets` and its gradient w.r.t. the
/// logits. Positions with target == `ignore` contribute nothing.
pub fn cross_entropy_grad(
    logits: &Array2<f32>,
    targets: &[u32],
    ignore: u32,
) -> (f32, Array2<f32>) {
    assert_eq!(logits.nrows(), targets.len());
    let probs = softmax_rows(logits);
    let mut grad = probs.clone();
    let mut loss = 0.0f32;
    let mut count = 0usize;
    for (i, &t) in targets.iter().enumerate() {
        if t == ignore {
            grad.row_mut(i).fill(0.0);
            continue;
        }
        loss -= probs[[i, t as usize]].max(1e-12).ln();
        grad[[i, t as usize]] -= 1.0;
        count += 1;
    }
    let count = count.max(1) as f32;
    grad.mapv_inplace(|v| v / count);
    (loss / count, grad)
}

/// Fixed sinusoidal position encodings, one row per position.
pub fn sinusoid_positions(positions: usize, d_model: usize) -> Array2<f32> {
    let mut out = Array2::zeros((positions, d_model));
    let half = d_model / 2;
    for p in 0..positions {
        for i in 0..half {
            let angle = p as f64 / 10000f64.powf(i as f64 / half.max(1) as f64);
            out[[p, i]] = angle.sin() as f32;
            out[[p, half + i]] = angle.cos() as f32;
        }
    }
    out
}

/// Row vector broadcast helper: y[r] += v for every row r.
pub fn add_row_inplace(x: &mut Array2<f32>, v: &Array1<f32>) {
    for mut row in x.rows_mut() {
        row += v;
    }
}

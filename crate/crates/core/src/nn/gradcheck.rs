//! Finite-difference checks for every hand-written backward pass. Shapes
//! are kept tiny so central differences in f32 stay well conditioned.

use ndarray::{Array2, Ix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

const FD_EPS: f32 = 1e-3;
const TOL: f32 = 2e-2;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f32> {
    Param::randn("tmp", &[rows, cols], 0.5, rng)
        .data
        .into_dimensionality::<Ix2>()
        .unwrap()
}

/// Scalar loss used everywhere: weighted sum of the output so the
/// upstream gradient is a fixed random matrix.
fn weighted_sum(y: &Array2<f32>, w: &Array2<f32>) -> f32 {
    y.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
}

fn assert_close(analytic: f32, numeric: f32, what: &str) {
    let denom = analytic.abs().max(numeric.abs()).max(1.0);
    assert!(
        (analytic - numeric).abs() / denom < TOL,
        "{what}: analytic {analytic} vs numeric {numeric}"
    );
}

/// Central-difference check of dL/dx against `grad_x` for an arbitrary
/// forward closure, probing every input element.
fn check_input_grad(
    x: &Array2<f32>,
    grad_x: &Array2<f32>,
    mut f: impl FnMut(&Array2<f32>) -> f32,
    what: &str,
) {
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut xp = x.clone();
            xp[[i, j]] += FD_EPS;
            let mut xm = x.clone();
            xm[[i, j]] -= FD_EPS;
            let numeric = (f(&xp) - f(&xm)) / (2.0 * FD_EPS);
            assert_close(grad_x[[i, j]], numeric, &format!("{what} x[{i},{j}]"));
        }
    }
}

/// Checks accumulated parameter gradients for a module by perturbing each
/// element of each trainable parameter.
fn check_param_grads<M: ParamVisitor>(
    module: &mut M,
    mut f: impl FnMut(&mut M) -> f32,
    what: &str,
) {
    // snapshot analytic grads first, since f() may not clear them
    let mut names = Vec::new();
    module.visit_params(&mut |p| {
        if p.trainable {
            names.push((p.name.clone(), p.grad.clone()));
        }
    });
    for (name, grad) in names {
        for idx in 0..grad.len() {
            let analytic = grad.as_slice().unwrap()[idx];
            let bump = |module: &mut M, delta: f32| {
                module.visit_params(&mut |p| {
                    if p.name == name {
                        p.data.as_slice_mut().unwrap()[idx] += delta;
                    }
                });
            };
            bump(module, FD_EPS);
            let up = f(module);
            bump(module, -2.0 * FD_EPS);
            let down = f(module);
            bump(module, FD_EPS);
            let numeric = (up - down) / (2.0 * FD_EPS);
            assert_close(analytic, numeric, &format!("{what} {name}[{idx}]"));
        }
    }
}

fn mark_all_trainable<M: ParamVisitor>(module: &mut M) {
    module.visit_params(&mut |p| p.trainable = true);
}

fn zero_grads<M: ParamVisitor>(module: &mut M) {
    module.visit_params(&mut |p| p.zero_grad());
}

#[test]
fn linear_gradients() {
    let mut r = rng(1);
    let mut layer = Linear::new("lin", 4, 3, &mut r);
    mark_all_trainable(&mut layer);
    let x = random_matrix(2, 4, &mut r);
    let gw = random_matrix(2, 3, &mut r);
    zero_grads(&mut layer);
    let grad_x = {
        let _y = layer.forward(&x);
        layer.backward(&x, &gw)
    };
    check_input_grad(&x, &grad_x, |xx| weighted_sum(&layer.forward(xx), &gw), "linear");
    check_param_grads(&mut layer, |m| weighted_sum(&m.forward(&x), &gw), "linear");
}

#[test]
fn lora_gradients() {
    let mut r = rng(2);
    let mut layer = Linear::new("lora_lin", 4, 4, &mut r);
    layer.attach_lora(2, &mut r);
    // make the adapter path nontrivial: up starts at zero
    if let Some(lora) = &mut layer.lora {
        for v in lora.up.data.iter_mut() {
            *v = 0.3;
        }
        lora.rank_keep[1] = 0.0; // one pruned component
    }
    mark_all_trainable(&mut layer);
    // freeze the base so only the adapter trains, matching real use
    layer.w.trainable = false;
    layer.b.trainable = false;
    let x = random_matrix(3, 4, &mut r);
    let gw = random_matrix(3, 4, &mut r);
    zero_grads(&mut layer);
    let grad_x = layer.backward(&x, &gw);
    check_input_grad(&x, &grad_x, |xx| weighted_sum(&layer.forward(xx), &gw), "lora");
    check_param_grads(&mut layer, |m| weighted_sum(&m.forward(&x), &gw), "lora");
}

#[test]
fn pruned_lora_rank_carries_no_gradient() {
    let mut r = rng(3);
    let mut layer = Linear::new("pruned", 3, 3, &mut r);
    layer.attach_lora(2, &mut r);
    if let Some(lora) = &mut layer.lora {
        for v in lora.up.data.iter_mut() {
            *v = 0.5;
        }
        lora.rank_keep[0] = 0.0;
    }
    mark_all_trainable(&mut layer);
    let x = random_matrix(2, 3, &mut r);
    let gw = random_matrix(2, 3, &mut r);
    zero_grads(&mut layer);
    layer.backward(&x, &gw);
    let lora = layer.lora.as_ref().unwrap();
    let down_grad = lora.down.grad.view().into_dimensionality::<Ix2>().unwrap();
    for v in down_grad.row(0) {
        assert_eq!(*v, 0.0, "pruned rank must not receive gradient");
    }
}

#[test]
fn conv1d_gradients() {
    let mut r = rng(4);
    // stride 2 with padding, the shape used by the downsampling frontend
    let mut conv = Conv1d::new("conv", 3, 2, 3, 2, 1, &mut r);
    mark_all_trainable(&mut conv);
    let x = random_matrix(7, 3, &mut r);
    let t_out = conv.output_len(7);
    let gw = random_matrix(t_out, 2, &mut r);
    zero_grads(&mut conv);
    let (_, cache) = conv.forward(&x);
    let grad_x = conv.backward(&cache, &gw);
    check_input_grad(&x, &grad_x, |xx| weighted_sum(&conv.forward(xx).0, &gw), "conv");
    check_param_grads(&mut conv, |m| weighted_sum(&m.forward(&x).0, &gw), "conv");
}

#[test]
fn layernorm_gradients() {
    let mut r = rng(5);
    let mut ln = LayerNorm::new("ln", 5);
    // non-identity affine so gamma/beta grads are exercised
    for (i, v) in ln.gamma.data.iter_mut().enumerate() {
        *v = 0.8 + 0.1 * i as f32;
    }
    for (i, v) in ln.beta.data.iter_mut().enumerate() {
        *v = -0.2 + 0.05 * i as f32;
    }
    mark_all_trainable(&mut ln);
    let x = random_matrix(3, 5, &mut r);
    let gw = random_matrix(3, 5, &mut r);
    zero_grads(&mut ln);
    let (_, cache) = ln.forward(&x);
    let grad_x = ln.backward(&cache, &gw);
    check_input_grad(&x, &grad_x, |xx| weighted_sum(&ln.forward(xx).0, &gw), "layernorm");
    check_param_grads(&mut ln, |m| weighted_sum(&m.forward(&x).0, &gw), "layernorm");
}

#[test]
fn gelu_gradient() {
    let mut r = rng(6);
    let x = random_matrix(3, 4, &mut r);
    let gw = random_matrix(3, 4, &mut r);
    let grad_x = gelu_backward(&x, &gw);
    check_input_grad(&x, &grad_x, |xx| weighted_sum(&gelu(xx), &gw), "gelu");
}

#[test]
fn self_attention_gradients() {
    let mut r = rng(7);
    let mut attn = MultiHeadAttention::new("self", 6, 2, &mut r);
    mark_all_trainable(&mut attn);
    let x = random_matrix(4, 6, &mut r);
    let gw = random_matrix(4, 6, &mut r);
    zero_grads(&mut attn);
    let (_, cache) = attn.forward(&x, &x, true);
    let (gq, gkv) = attn.backward(&cache, &gw);
    let grad_x = &gq + &gkv;
    check_input_grad(
        &x,
        &grad_x,
        |xx| weighted_sum(&attn.forward(xx, xx, true).0, &gw),
        "self-attn",
    );
    check_param_grads(
        &mut attn,
        |m| weighted_sum(&m.forward(&x, &x, true).0, &gw),
        "self-attn",
    );
}

#[test]
fn cross_attention_gradients() {
    let mut r = rng(8);
    let mut attn = MultiHeadAttention::new("cross", 6, 3, &mut r);
    mark_all_trainable(&mut attn);
    let q = random_matrix(3, 6, &mut r);
    let kv = random_matrix(5, 6, &mut r);
    let gw = random_matrix(3, 6, &mut r);
    zero_grads(&mut attn);
    let (_, cache) = attn.forward(&q, &kv, false);
    let (gq, gkv) = attn.backward(&cache, &gw);
    check_input_grad(
        &q,
        &gq,
        |qq| weighted_sum(&attn.forward(qq, &kv, false).0, &gw),
        "cross-attn q",
    );
    check_input_grad(
        &kv,
        &gkv,
        |kk| weighted_sum(&attn.forward(&q, kk, false).0, &gw),
        "cross-attn kv",
    );
}

#[test]
fn causal_mask_blocks_future_positions() {
    let mut r = rng(9);
    let attn = MultiHeadAttention::new("mask", 4, 2, &mut r);
    let x = random_matrix(5, 4, &mut r);
    let (y_full, _) = attn.forward(&x, &x, true);
    // changing the last row must not affect earlier outputs
    let mut x2 = x.clone();
    for v in x2.row_mut(4) {
        *v += 10.0;
    }
    let (y_mod, _) = attn.forward(&x2, &x2, true);
    for i in 0..4 {
        for j in 0..4 {
            assert!(
                (y_full[[i, j]] - y_mod[[i, j]]).abs() < 1e-5,
                "causal output row {i} leaked future information"
            );
        }
    }
}

#[test]
fn cross_entropy_gradient_matches_finite_difference() {
    let mut r = rng(10);
    let logits = random_matrix(4, 5, &mut r);
    let targets = [2u32, 0, u32::MAX, 4];
    let ignore = u32::MAX;
    let (_, grad) = cross_entropy_grad(&logits, &targets, ignore);
    check_input_grad(
        &logits,
        &grad,
        |l| cross_entropy_grad(l, &targets, ignore).0,
        "cross-entropy",
    );
    // ignored row contributes no gradient at all
    for v in grad.row(2) {
        assert_eq!(*v, 0.0);
    }
}

#[test]
fn log_softmax_agrees_with_softmax() {
    let mut r = rng(11);
    let x = random_matrix(3, 6, &mut r);
    let p = softmax_rows(&x);
    let lp = log_softmax_rows(&x);
    for (a, b) in p.iter().zip(lp.iter()) {
        assert!((a.ln() - b).abs() < 1e-5);
    }
}

#[test]
fn adamw_decays_weights_without_gradient_coupling() {
    // with zero gradient, the update is pure decay: x -> x * (1 - lr*wd)
    let mut opt = AdamW::new(0.1, 0.5, 0);
    let mut p = Param::zeros("w", &[2]);
    p.trainable = true;
    p.data.fill(1.0);
    opt.begin_step();
    opt.update(&mut p);
    for v in p.data.iter() {
        assert!((v - 0.95).abs() < 1e-6, "expected pure decay, got {v}");
    }
}

#[test]
fn adamw_first_step_is_signed_lr() {
    // classic Adam property: after one step with constant gradient the
    // update magnitude is ~lr regardless of gradient scale
    let mut opt = AdamW::new(0.01, 0.0, 0);
    let mut p = Param::zeros("w", &[3]);
    p.trainable = true;
    p.grad.fill(7.0);
    opt.begin_step();
    opt.update(&mut p);
    for v in p.data.iter() {
        assert!((v + 0.01).abs() < 1e-5, "expected -lr step, got {v}");
    }
}

#[test]
fn adamw_warmup_ramps_linearly() {
    let mut opt = AdamW::new(1.0, 0.0, 4);
    let mut seen = Vec::new();
    for _ in 0..6 {
        seen.push(opt.current_lr());
        opt.begin_step();
    }
    assert_eq!(seen, vec![0.25, 0.5, 0.75, 1.0, 1.0, 1.0]);
}

#[test]
fn adamw_skips_frozen_params() {
    let mut opt = AdamW::new(0.1, 0.1, 0);
    let mut p = Param::zeros("w", &[2]);
    p.trainable = false;
    p.data.fill(1.0);
    p.grad.fill(1.0);
    opt.begin_step();
    opt.update(&mut p);
    for v in p.data.iter() {
        assert_eq!(*v, 1.0);
    }
}

#[test]
fn sinusoid_positions_are_bounded_and_distinct() {
    let pe = sinusoid_positions(16, 8);
    for v in pe.iter() {
        assert!(v.abs() <= 1.0 + 1e-6);
    }
    // position 0 is all sin(0)=0 / cos(0)=1
    for j in 0..4 {
        assert_eq!(pe[[0, j]], 0.0);
        assert_eq!(pe[[0, 4 + j]], 1.0);
    }
    for i in 1..16 {
        let diff: f32 = pe
            .row(0)
            .iter()
            .zip(pe.row(i).iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-3, "position {i} collides with position 0");
    }
}

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::{AdamW, ParamVisitor};
use crate::signal::Recording;

use super::*;

fn toy_tokenizer() -> Tokenizer {
    Tokenizer::from_corpus(
        ["the cat sat down", "a dog ran fast", "birds sing loudly"],
        &["en"],
    )
    .unwrap()
}

fn toy_model() -> AdaptedModel {
    let handle = BackboneHandle::new("toy-tiny", toy_tokenizer(), "en").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let frontend = build_frontend(
        FrontendConfig { in_channels: 8, d_model: handle.spec.d_model },
        &mut rng,
    )
    .unwrap();
    let window = handle.window_samples();
    graft(handle, frontend, window).unwrap()
}

fn random_window(model: &AdaptedModel, seed: u64) -> Array2<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((model.window_samples, model.in_channels()), |_| {
        rng.random_range(-1.0f32..1.0)
    })
}

#[test]
fn tokenizer_round_trips_its_vocabulary() {
    let t = toy_tokenizer();
    for word in t.words() {
        let ids = t.encode_words(word);
        assert_eq!(ids.len(), 1);
        assert_eq!(t.decode(&ids), word);
    }
    let sentence = "the cat sat down";
    let ids = t.encode_target(sentence, "en").unwrap();
    assert_eq!(t.decode(&ids[Tokenizer::prompt_len()..]), sentence);
}

#[test]
fn tokenizer_serde_round_trip() {
    let t = toy_tokenizer();
    let json = serde_json::to_string(&t).unwrap();
    let mut back: Tokenizer = serde_json::from_str(&json).unwrap();
    back.rebuild_index();
    assert_eq!(t, back);
    assert_eq!(back.token_id("cat"), t.token_id("cat"));
}

#[test]
fn tokenizer_specials_and_prompt() {
    let t = toy_tokenizer();
    assert_eq!(t.token(PAD_ID), Some("<pad>"));
    assert_eq!(t.token(BOS_ID), Some("<bos>"));
    assert_eq!(t.token(EOS_ID), Some("<eos>"));
    assert_eq!(t.token(UNK_ID), Some("<unk>"));
    let prompt = t.prompt("en").unwrap();
    assert_eq!(prompt.len(), Tokenizer::prompt_len());
    assert_eq!(prompt[0], BOS_ID);
    assert_eq!(t.token(prompt[1]), Some("<lang:en>"));
    assert_eq!(t.token(prompt[2]), Some("<task:transcribe>"));
    assert!(t.prompt("nl").is_err());
    assert_eq!(t.encode_words("zebra")[0], UNK_ID);
}

#[test]
fn target_masking_covers_prompt_positions() {
    let t = toy_tokenizer();
    let ids = t.encode_target("the cat", "en").unwrap();
    let (inputs, targets) = training_targets(&ids).unwrap();
    assert_eq!(inputs.len(), ids.len() - 1);
    assert_eq!(targets.len(), inputs.len());
    // positions predicting the language and task tags carry no loss
    assert_eq!(targets[0], IGNORE_ID);
    assert_eq!(targets[1], IGNORE_ID);
    assert_eq!(t.token(targets[2]), Some("the"));
    assert_eq!(*targets.last().unwrap(), EOS_ID);
}

#[test]
fn backbone_spec_table() {
    let base = backbone_spec("base").unwrap();
    assert_eq!(base.d_model, 512);
    assert_eq!(base.encoder_layers, 6);
    assert_eq!(base.frame_capacity, 1500);
    assert!(backbone_spec("giant").is_err());
    assert!(known_backbones().contains(&"toy-tiny"));
}

#[test]
fn frontend_shape_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = build_frontend(FrontendConfig { in_channels: 208, d_model: 512 }, &mut rng).unwrap();
    assert_eq!(f.output_frames(3000), 1500);
    let f = build_frontend(FrontendConfig { in_channels: 273, d_model: 512 }, &mut rng).unwrap();
    assert_eq!(f.output_frames(3000), 1500);
    assert_eq!(f.output_frames(1), 1);
}

#[test]
fn frontend_forward_shape_and_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = build_frontend(FrontendConfig { in_channels: 8, d_model: 64 }, &mut rng).unwrap();
    let x = Array2::from_elem((200, 8), 0.1f32);
    let (y, _) = f.forward(&x);
    assert_eq!(y.dim(), (100, 64));
}

proptest! {
    #[test]
    fn frontend_frames_are_ceil_half(t in 1usize..=4096) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = build_frontend(FrontendConfig { in_channels: 2, d_model: 8 }, &mut rng).unwrap();
        prop_assert_eq!(f.output_frames(t), t.div_ceil(2));
    }
}

#[test]
fn graft_rejects_frame_capacity_mismatch() {
    let handle = BackboneHandle::new("toy-tiny", toy_tokenizer(), "en").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let frontend = build_frontend(
        FrontendConfig { in_channels: 8, d_model: handle.spec.d_model },
        &mut rng,
    )
    .unwrap();
    // 150-sample window gives 75 frames against a capacity of 100
    let err = graft(handle, frontend, 150).unwrap_err().to_string();
    assert!(err.contains("75"), "error should name the produced frame count: {err}");
    assert!(err.contains("100"), "error should name the capacity: {err}");
}

#[test]
fn graft_rejects_width_mismatch() {
    let handle = BackboneHandle::new("toy-tiny", toy_tokenizer(), "en").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let frontend = build_frontend(FrontendConfig { in_channels: 8, d_model: 32 }, &mut rng).unwrap();
    let window = handle.window_samples();
    assert!(graft(handle, frontend, window).is_err());
}

#[test]
fn graft_is_deterministic_in_the_identifier() {
    let a = toy_model();
    let mut b = toy_model();
    let mut bs = Vec::new();
    b.visit_params(&mut |p| bs.push(p.data.clone()));
    let mut a = a;
    let mut i = 0;
    a.visit_params(&mut |p| {
        assert_eq!(p.data, bs[i], "param {} differs between identical grafts", p.name);
        i += 1;
    });
}

#[test]
fn forward_logits_have_vocab_width() {
    let model = toy_model();
    let x = random_window(&model, 11);
    let enc = model.encode(&x);
    assert_eq!(enc.dim(), (100, 64));
    let tokens = model.tokenizer().encode_target("the cat sat", "en").unwrap();
    let logits = model.decode_logits(&tokens, &enc);
    assert_eq!(logits.dim(), (tokens.len(), model.tokenizer().vocab_size()));
    assert!(logits.iter().all(|v| v.is_finite()));
}

#[test]
fn pad_channels_appends_zero_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let samples = Array2::from_shape_fn((208, 50), |_| rng.random_range(-1.0..1.0));
    let rec = Recording::new(samples.clone(), 200.0).unwrap();
    let padded = pad_channels(&rec, 273).unwrap();
    assert_eq!(padded.channels(), 273);
    for c in 0..208 {
        for t in 0..50 {
            assert!(padded.samples[[c, t]].to_bits() == samples[[c, t]].to_bits());
        }
    }
    for c in 208..273 {
        assert!(padded.samples.row(c).iter().all(|v| *v == 0.0));
    }
}

#[test]
fn pad_channels_identity_and_error() {
    let rec = Recording::new(Array2::from_elem((10, 20), 0.5), 100.0).unwrap();
    let same = pad_channels(&rec, 10).unwrap();
    assert_eq!(same.samples, rec.samples);
    assert!(pad_channels(&rec, 8).is_err());
}

#[test]
fn padded_input_matches_frontend_built_for_padded_width() {
    // frontend built for c channels consuming padded input has the same
    // output shape as the unpadded frontend on unpadded input widthwise
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rec = Recording::new(Array2::from_elem((8, 60), 0.25), 100.0).unwrap();
    let padded = pad_channels(&rec, 12).unwrap();
    let f = build_frontend(FrontendConfig { in_channels: 12, d_model: 16 }, &mut rng).unwrap();
    let x = segment_to_input(&padded, 60);
    let (y, _) = f.forward(&x);
    assert_eq!(y.dim(), (30, 16));
}

#[test]
fn segment_to_input_pads_and_truncates() {
    let rec = Recording::new(Array2::from_elem((2, 30), 1.0), 100.0).unwrap();
    let x = segment_to_input(&rec, 50);
    assert_eq!(x.dim(), (50, 2));
    assert_eq!(x[[29, 0]], 1.0);
    assert_eq!(x[[30, 0]], 0.0);
    let x = segment_to_input(&rec, 20);
    assert_eq!(x.dim(), (20, 2));
}

#[test]
fn trainability_plan_freezes_decoder_and_trains_adapters() {
    let mut model = toy_model();
    plan_trainability(&mut model, &TrainabilityPlan::default()).unwrap();
    let (trainable, total) = model.param_counts();
    assert!(trainable > 0);
    assert!(trainable < total / 2, "adapter-only ratio should be well below 1");
    model.decoder.visit_params(&mut |p| assert!(!p.trainable, "{} must be frozen", p.name));
    model.frontend.visit_params(&mut |p| assert!(p.trainable));
    let mut lora_seen = 0;
    model.encoder.visit_params(&mut |p| {
        if p.name.contains(".lora_") {
            assert!(p.trainable);
            lora_seen += 1;
        } else {
            assert!(!p.trainable, "{} is base encoder weight", p.name);
        }
    });
    // q/k/v/o + fc1 + fc2 per block, two params per adapter
    assert_eq!(lora_seen, model.encoder.blocks.len() * 6 * 2);
}

#[test]
fn trainability_plan_rejects_bad_groups() {
    let mut model = toy_model();
    let mut plan = TrainabilityPlan::default();
    plan.adapted = vec![];
    assert!(plan_trainability(&mut model, &plan).is_err());
    plan.adapted = vec!["encoder".into()];
    plan.frozen = vec!["encoder".into()];
    assert!(plan_trainability(&mut model, &plan).is_err());
    plan.frozen = vec!["wheels".into()];
    assert!(plan_trainability(&mut model, &plan).is_err());
}

#[test]
fn frontend_receives_gradient_and_decoder_stays_bit_identical() {
    let mut model = toy_model();
    plan_trainability(&mut model, &TrainabilityPlan::default()).unwrap();
    let mut dec_before = Vec::new();
    model.decoder.visit_params(&mut |p| dec_before.push(p.data.clone()));
    let x = random_window(&model, 21);
    let tokens = model.tokenizer().encode_target("the cat sat down", "en").unwrap();
    let mut opt = AdamW::new(1e-3, 0.01, 0);
    model.zero_grads();
    let loss = model.loss_and_backward(&x, &tokens).unwrap();
    assert!(loss.is_finite() && loss > 0.0);
    let mut frontend_grad_norm = 0.0f32;
    model.frontend.visit_params(&mut |p| {
        frontend_grad_norm += p.grad.iter().map(|g| g * g).sum::<f32>();
    });
    assert!(frontend_grad_norm > 0.0, "frontend must receive gradient");
    opt.begin_step();
    model.visit_params(&mut |p| opt.update(p));
    let mut i = 0;
    model.decoder.visit_params(&mut |p| {
        assert_eq!(p.data, dec_before[i], "{} changed despite being frozen", p.name);
        i += 1;
    });
}

#[test]
fn freeze_top_k_layer_selection() {
    let mut model = toy_model();
    plan_trainability(&mut model, &TrainabilityPlan::default()).unwrap();
    let layers = model.encoder.blocks.len();

    freeze_layers_except_top_k(&mut model, 0).unwrap();
    model.encoder.visit_params(&mut |p| assert!(!p.trainable));
    model.frontend.visit_params(&mut |p| assert!(p.trainable));

    freeze_layers_except_top_k(&mut model, layers).unwrap();
    let mut active = 0;
    model.encoder.visit_params(&mut |p| {
        if p.name.contains(".lora_") {
            assert!(p.trainable);
            active += 1;
        }
    });
    assert_eq!(active, layers * 12);

    freeze_layers_except_top_k(&mut model, 1).unwrap();
    model.encoder.visit_params(&mut |p| {
        if p.name.contains(".lora_") {
            let in_top = p.name.starts_with(&format!("encoder.b{}", layers - 1));
            assert_eq!(p.trainable, in_top, "{}", p.name);
        }
    });

    assert!(freeze_layers_except_top_k(&mut model, layers + 1).is_err());
}

#[test]
fn whole_model_gradient_matches_finite_difference() {
    let mut model = toy_model();
    plan_trainability(&mut model, &TrainabilityPlan::default()).unwrap();
    let x = random_window(&model, 31);
    let tokens = model.tokenizer().encode_target("a dog ran", "en").unwrap();
    model.zero_grads();
    model.loss_and_backward(&x, &tokens).unwrap();
    // probe a few trainable coordinates across the frontend and adapters
    let probes = [
        ("frontend.conv1.w", 5usize),
        ("frontend.conv2.b", 0usize),
        ("encoder.b0.attn.q.lora_down", 3usize),
        ("encoder.b1.fc1.lora_down", 7usize),
    ];
    for (name, idx) in probes {
        let mut analytic = None;
        model.visit_params(&mut |p| {
            if p.name == name {
                analytic = Some(p.grad.as_slice().unwrap()[idx]);
            }
        });
        let analytic = analytic.unwrap_or_else(|| panic!("missing param {name}"));
        let eps = 1e-2f32;
        let bump = |m: &mut AdaptedModel, d: f32| {
            m.visit_params(&mut |p| {
                if p.name == name {
                    p.data.as_slice_mut().unwrap()[idx] += d;
                }
            });
        };
        bump(&mut model, eps);
        let up = model.loss(&x, &tokens).unwrap();
        bump(&mut model, -2.0 * eps);
        let down = model.loss(&x, &tokens).unwrap();
        bump(&mut model, eps);
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic.abs().max(numeric.abs()).max(1e-3);
        assert!(
            (analytic - numeric).abs() / denom < 0.12,
            "{name}[{idx}]: analytic {analytic} vs numeric {numeric}"
        );
    }
}

#[test]
fn loss_descends_over_fifty_steps() {
    let mut model = toy_model();
    plan_trainability(&mut model, &TrainabilityPlan::default()).unwrap();
    let x = random_window(&model, 41);
    let tokens = model.tokenizer().encode_target("birds sing loudly", "en").unwrap();
    let mut opt = AdamW::new(1e-3, 0.01, 0);
    let initial = model.loss(&x, &tokens).unwrap();
    let mut last = initial;
    for _ in 0..50 {
        model.zero_grads();
        last = model.loss_and_backward(&x, &tokens).unwrap();
        assert!(last.is_finite(), "loss must stay finite");
        opt.begin_step();
        model.visit_params(&mut |p| opt.update(p));
    }
    assert!(
        last < initial,
        "loss should decrease over 50 steps: {initial} -> {last}"
    );
}

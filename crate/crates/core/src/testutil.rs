//! Shared fixtures for unit tests: a small grafted model and random
//! training samples.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    build_frontend, graft, plan_trainability, AdaptedModel, BackboneHandle, FrontendConfig,
    Tokenizer, TrainabilityPlan,
};
use crate::train::Sample;

pub const TEST_SENTENCES: [&str; 4] = [
    "the cat sat down",
    "a dog ran fast",
    "birds sing loudly",
    "rain fell all night",
];

pub fn test_tokenizer() -> Tokenizer {
    Tokenizer::from_corpus(TEST_SENTENCES, &["en"]).unwrap()
}

/// toy-tiny model with 8 input channels and adapters attached.
pub fn test_model() -> AdaptedModel {
    let handle = BackboneHandle::new("toy-tiny", test_tokenizer(), "en").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let frontend = build_frontend(
        FrontendConfig { in_channels: 8, d_model: handle.spec.d_model },
        &mut rng,
    )
    .unwrap();
    let window = handle.window_samples();
    let mut model = graft(handle, frontend, window).unwrap();
    plan_trainability(&mut model, &TrainabilityPlan::default()).unwrap();
    model
}

pub fn test_window(model: &AdaptedModel, seed: u64) -> Array2<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((model.window_samples, model.in_channels()), |_| {
        rng.random_range(-1.0f32..1.0)
    })
}

pub fn test_samples(model: &AdaptedModel) -> Vec<Sample> {
    TEST_SENTENCES
        .iter()
        .enumerate()
        .map(|(i, s)| Sample {
            input: test_window(model, 100 + i as u64),
            tokens: model.tokenizer().encode_target(s, "en").unwrap(),
            sentence: s.to_string(),
        })
        .collect()
}

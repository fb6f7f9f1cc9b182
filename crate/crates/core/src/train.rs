//! Training harness: deterministic mini-batch loop with early stopping and
//! best-checkpoint selection, plus the finetune / joint / sweep regimes.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array2, IxDyn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::generate::GenerationConfig;
use crate::model::{
    build_frontend, graft, plan_trainability, segment_to_input, AdaptedModel, BackboneHandle,
    FrontendConfig, Tokenizer, TrainabilityPlan,
};
use crate::nn::{AdamW, ParamVisitor};
use crate::report::{evaluate_corpus, EvaluationReport};
use crate::signal::Recording;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience_epochs: usize,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub seed: u64,
    pub data_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 500,
            patience_epochs: 5,
            weight_decay: 0.01,
            warmup_steps: 100,
            seed: 0,
            data_ratio: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience_epochs == 0 {
            return Err(Error::config("batch_size, max_epochs and patience_epochs must be >= 1"));
        }
        if !(self.data_ratio > 0.0 && self.data_ratio <= 1.0) {
            return Err(Error::config("data_ratio must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_loss_history: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// One training example: an input window and its target token sequence.
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: Array2<f32>,
    pub tokens: Vec<u32>,
    pub sentence: String,
}

impl Sample {
    pub fn from_recording(
        rec: &Recording,
        sentence: &str,
        tokenizer: &Tokenizer,
        language: &str,
        window: usize,
    ) -> Result<Sample> {
        Ok(Sample {
            input: segment_to_input(rec, window),
            tokens: tokenizer.encode_target(sentence, language)?,
            sentence: sentence.to_string(),
        })
    }
}

/// Strict-improvement early stopping: a tie counts as no improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    streak: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper { patience, best: f64::INFINITY, best_epoch: 0, streak: 0 }
    }

    /// Returns (improved, stop) for this epoch's validation loss.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.streak = 0;
            (true, false)
        } else {
            self.streak += 1;
            (false, self.streak >= self.patience)
        }
    }
}

fn mean_val_loss(model: &AdaptedModel, set: &[Sample]) -> Result<f64> {
    let mut total = 0.0f64;
    for s in set {
        total += model.loss(&s.input, &s.tokens)? as f64;
    }
    Ok(total / set.len() as f64)
}

/// Snapshot of every persisted (adapter + frontend) parameter.
fn persisted_snapshot(model: &mut AdaptedModel) -> Vec<(String, ndarray::ArrayD<f32>)> {
    let mut out = Vec::new();
    model.visit_params(&mut |p| {
        if is_persisted(&p.name) {
            out.push((p.name.clone(), p.data.clone()));
        }
    });
    out
}

fn restore_snapshot(model: &mut AdaptedModel, snap: &[(String, ndarray::ArrayD<f32>)]) {
    let mut i = 0;
    model.visit_params(&mut |p| {
        if is_persisted(&p.name) {
            debug_assert_eq!(p.name, snap[i].0);
            p.data.assign(&snap[i].1);
            i += 1;
        }
    });
}

/// Adapter and frontend weights are persisted; frozen backbone weights are
/// regenerated from the backbone identifier.
fn is_persisted(name: &str) -> bool {
    name.starts_with("frontend.") || name.contains(".lora_")
}

/// Trains in place, leaving the best-epoch weights in the model.
/// `on_epoch(epoch, train_loss, val_loss)` fires once per completed epoch.
pub fn train(
    model: &mut AdaptedModel,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<RunState> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::config("train and validation sets must be non-empty"));
    }
    let (trainable, _) = model.param_counts();
    if trainable == 0 {
        return Err(Error::config("no trainable parameters: apply a trainability plan first"));
    }
    let mut opt = AdamW::new(cfg.learning_rate as f32, cfg.weight_decay as f32, cfg.warmup_steps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut state = RunState {
        epoch: 0,
        train_loss: f64::NAN,
        eval_loss_history: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    let mut best = persisted_snapshot(model);
    let mut stopper = EarlyStopper::new(cfg.patience_epochs);

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            model.zero_grads();
            let mut batch_loss = 0.0f64;
            for &i in batch {
                let s = &train_set[i];
                let loss = model.loss_and_backward(&s.input, &s.tokens)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite training loss at epoch {epoch}"
                    )));
                }
                batch_loss += loss as f64;
            }
            let scale = 1.0 / batch.len() as f32;
            model.visit_params(&mut |p| {
                if p.trainable {
                    p.grad.mapv_inplace(|g| g * scale);
                }
            });
            opt.begin_step();
            model.visit_params(&mut |p| opt.update(p));
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = mean_val_loss(model, val_set)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite validation loss at epoch {epoch}")));
        }
        state.epoch = epoch;
        state.train_loss = train_loss;
        state.eval_loss_history.push(val_loss);
        on_epoch(epoch, train_loss, val_loss);
        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            state.best_val_loss = val_loss;
            state.best_epoch = epoch;
            best = persisted_snapshot(model);
        } else if stop {
            state.stopped_early = true;
            break;
        }
    }
    restore_snapshot(model, &best);
    Ok(state)
}

/// Uniform subsample of round(ratio * n) entries. Entries are ranked by a
/// seeded per-index key, so smaller ratios select subsets of larger ones.
pub fn subsample_data_ratio<T: Clone>(set: &[T], ratio: f64, seed: u64) -> Result<Vec<T>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::config("data ratio must lie in (0, 1]"));
    }
    let n = set.len();
    let k = (ratio * n as f64).round() as usize;
    if k == 0 {
        return Err(Error::config(format!("ratio {ratio} of {n} entries selects nothing")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keys: Vec<u64> = (0..n).map(|_| rng.random()).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| (keys[i], i));
    let mut chosen: Vec<usize> = idx.into_iter().take(k).collect();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| set[i].clone()).collect())
}

// ---------------------------------------------------------------------------
// checkpointing

const WEIGHTS_MAGIC: &[u8; 4] = b"NTWT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub backbone: String,
    pub language: String,
    pub in_channels: usize,
    pub window_samples: usize,
    pub plan: TrainabilityPlan,
    pub val_loss: f64,
    pub epoch: usize,
}

pub fn save_checkpoint(
    model: &mut AdaptedModel,
    plan: &TrainabilityPlan,
    dir: &Path,
    val_loss: f64,
    epoch: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io_path(dir, e))?;
    let meta = CheckpointMeta {
        backbone: model.handle.identifier.clone(),
        language: model.handle.language_tag.clone(),
        in_channels: model.in_channels(),
        window_samples: model.window_samples,
        plan: plan.clone(),
        val_loss,
        epoch,
    };
    let meta_path = dir.join("model.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .map_err(|e| Error::io_path(&meta_path, e))?;
    let tok_path = dir.join("tokenizer.json");
    fs::write(&tok_path, serde_json::to_string(&model.handle.tokenizer)?)
        .map_err(|e| Error::io_path(&tok_path, e))?;

    let weights_path = dir.join("weights.bin");
    let file = fs::File::create(&weights_path).map_err(|e| Error::io_path(&weights_path, e))?;
    let mut w = BufWriter::new(file);
    let tensors = persisted_snapshot(model);
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, data) in &tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(data.ndim() as u32).to_le_bytes())?;
        for d in data.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in data.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_weights(path: &Path) -> Result<Vec<(String, ndarray::ArrayD<f32>)>> {
    let file = fs::File::open(path).map_err(|e| Error::io_path(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a weights archive", path.display())));
    }
    let count = read_exact_u32(&mut r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = read_exact_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("invalid tensor name".to_string()))?;
        let ndim = read_exact_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let len: usize = shape.iter().product();
        let mut values = vec![0f32; len];
        for v in values.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = f32::from_le_bytes(b);
        }
        let arr = ndarray::ArrayD::from_shape_vec(IxDyn(&shape), values)
            .map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
        out.push((name, arr));
    }
    Ok(out)
}

/// Rebuilds the model from a checkpoint directory: frozen backbone weights
/// come from the identifier, persisted adapter/frontend weights from the
/// archive.
pub fn load_checkpoint(dir: &Path) -> Result<(AdaptedModel, CheckpointMeta)> {
    let meta_path = dir.join("model.json");
    let meta: CheckpointMeta = serde_json::from_str(
        &fs::read_to_string(&meta_path).map_err(|e| Error::io_path(&meta_path, e))?,
    )?;
    let tok_path = dir.join("tokenizer.json");
    let mut tokenizer: Tokenizer = serde_json::from_str(
        &fs::read_to_string(&tok_path).map_err(|e| Error::io_path(&tok_path, e))?,
    )?;
    tokenizer.rebuild_index();
    let handle = BackboneHandle::new(&meta.backbone, tokenizer, &meta.language)?;
    let mut rng = ChaCha8Rng::seed_from_u64(meta.epoch as u64);
    let frontend = build_frontend(
        FrontendConfig { in_channels: meta.in_channels, d_model: handle.spec.d_model },
        &mut rng,
    )?;
    let mut model = graft(handle, frontend, meta.window_samples)?;
    plan_trainability(&mut model, &meta.plan)?;
    let tensors = read_weights(&dir.join("weights.bin"))?;
    let mut loaded = 0usize;
    model.visit_params(&mut |p| {
        if let Some((_, data)) = tensors.iter().find(|(n, _)| n == &p.name) {
            p.data.assign(data);
            loaded += 1;
        }
    });
    if loaded != tensors.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} tensors but only {loaded} matched the model",
            tensors.len()
        )));
    }
    Ok((model, meta))
}

/// Continues training from a checkpoint on new data with a fresh
/// optimizer. Inputs must already match the checkpoint's channel count
/// (pad recordings beforehand if needed).
pub fn finetune_from(
    checkpoint: &Path,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(AdaptedModel, RunState)> {
    let (mut model, _) = load_checkpoint(checkpoint)?;
    for s in train_set.iter().chain(val_set) {
        if s.input.ncols() != model.in_channels() {
            return Err(Error::config(format!(
                "sample has {} channels but the checkpoint expects {}; pad the recordings first",
                s.input.ncols(),
                model.in_channels()
            )));
        }
    }
    let state = train(&mut model, train_set, val_set, cfg, on_epoch)?;
    Ok((model, state))
}

/// A named corpus for joint training; evaluation stays per-dataset.
#[derive(Debug, Clone)]
pub struct JointDataset {
    pub name: String,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

fn pad_input_columns(x: &Array2<f32>, channels: usize) -> Array2<f32> {
    if x.ncols() == channels {
        return x.clone();
    }
    let mut out = Array2::zeros((x.nrows(), channels));
    out.slice_mut(s![.., ..x.ncols()]).assign(x);
    out
}

/// Trains one model on the pooled datasets, padding every sample to the
/// model's channel width. Returns per-dataset final validation losses in
/// input order.
pub fn joint_train(
    model: &mut AdaptedModel,
    datasets: &[JointDataset],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(RunState, Vec<f64>)> {
    if datasets.len() < 2 {
        return Err(Error::config("joint training needs at least two datasets"));
    }
    if datasets.iter().any(|d| d.train.is_empty() || d.val.is_empty()) {
        return Err(Error::config("joint training got an empty dataset"));
    }
    let channels = model.in_channels();
    for d in datasets {
        for s in d.train.iter().chain(&d.val) {
            if s.input.ncols() > channels {
                return Err(Error::config(format!(
                    "dataset '{}' has {} channels, above the model's {channels}",
                    d.name,
                    s.input.ncols()
                )));
            }
        }
    }
    let pad = |set: &[Sample]| -> Vec<Sample> {
        set.iter()
            .map(|s| Sample {
                input: pad_input_columns(&s.input, channels),
                tokens: s.tokens.clone(),
                sentence: s.sentence.clone(),
            })
            .collect()
    };
    let pooled_train: Vec<Sample> = datasets.iter().flat_map(|d| pad(&d.train)).collect();
    let pooled_val: Vec<Sample> = datasets.iter().flat_map(|d| pad(&d.val)).collect();
    let state = train(model, &pooled_train, &pooled_val, cfg, on_epoch)?;
    let mut per_dataset = Vec::with_capacity(datasets.len());
    for d in datasets {
        per_dataset.push(mean_val_loss(model, &pad(&d.val))?);
    }
    Ok((state, per_dataset))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: String,
    pub batch_size: usize,
    pub bleu1: Option<f64>,
    pub effective_epochs: Option<usize>,
    pub error: Option<String>,
}

/// Trains one model per backbone size with its paired batch size and
/// reports free-run BLEU-1 on the validation sentences. Failures are
/// recorded per row and the sweep continues.
#[allow(clippy::too_many_arguments)]
pub fn scaling_sweep(
    sizes: &[String],
    batch_sizes: &[usize],
    train_set: &[Sample],
    val_set: &[Sample],
    tokenizer: &Tokenizer,
    language: &str,
    plan: &TrainabilityPlan,
    gen_cfg: &GenerationConfig,
    cfg: &TrainConfig,
    epoch_cap: usize,
) -> Result<Vec<SweepRow>> {
    if sizes.len() != batch_sizes.len() {
        return Err(Error::config("sizes and batch sizes must pair up"));
    }
    if sizes.is_empty() {
        return Err(Error::config("scaling sweep needs at least one size"));
    }
    let in_channels = train_set
        .first()
        .map(|s| s.input.ncols())
        .ok_or_else(|| Error::config("scaling sweep needs training data"))?;
    let mut rows = Vec::with_capacity(sizes.len());
    for (size, &batch) in sizes.iter().zip(batch_sizes) {
        let run = || -> Result<(f64, usize)> {
            let handle = BackboneHandle::new(size, tokenizer.clone(), language)?;
            let window = handle.window_samples();
            if window != train_set[0].input.nrows() {
                return Err(Error::config(format!(
                    "size '{size}' expects a {window}-sample window but samples have {}",
                    train_set[0].input.nrows()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let frontend = build_frontend(
                FrontendConfig { in_channels, d_model: handle.spec.d_model },
                &mut rng,
            )?;
            let mut model = graft(handle, frontend, window)?;
            plan_trainability(&mut model, plan)?;
            let mut size_cfg = cfg.clone();
            size_cfg.batch_size = batch;
            size_cfg.max_epochs = epoch_cap;
            let state = train(&mut model, train_set, val_set, &size_cfg, |_, _, _| {})?;
            let segments: Vec<Array2<f32>> = val_set.iter().map(|s| s.input.clone()).collect();
            let references: Vec<String> = val_set.iter().map(|s| s.sentence.clone()).collect();
            let report = evaluate_corpus(&model, &segments, &references, gen_cfg)?;
            Ok((report.bleu[0], state.epoch))
        };
        match run() {
            Ok((bleu1, epochs)) => rows.push(SweepRow {
                size: size.clone(),
                batch_size: batch,
                bleu1: Some(bleu1),
                effective_epochs: Some(epochs),
                error: None,
            }),
            Err(e) => rows.push(SweepRow {
                size: size.clone(),
                batch_size: batch,
                bleu1: None,
                effective_epochs: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(rows)
}

/// Writes per-epoch metrics as CSV with a fixed header.
pub struct MetricsCsv {
    writer: csv::Writer<fs::File>,
    path: PathBuf,
}

impl MetricsCsv {
    pub fn create(path: &Path) -> Result<MetricsCsv> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io_path(parent, e))?;
        }
        let file = fs::File::create(path).map_err(|e| Error::io_path(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer
            .write_record(["epoch", "train_loss", "val_loss"])
            .map_err(|e| Error::Eval(e.to_string()))?;
        Ok(MetricsCsv { writer, path: path.to_path_buf() })
    }

    pub fn record(&mut self, epoch: usize, train_loss: f64, val_loss: f64) {
        // full float precision so reruns can be compared bit-exactly
        let _ = self.writer.write_record([
            epoch.to_string(),
            format!("{train_loss:?}"),
            format!("{val_loss:?}"),
        ]);
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io_path(&self.path, e))?;
        Ok(self.path)
    }
}

/// Persists a free-run / teacher-forcing / baseline report set.
pub fn write_report(report: &EvaluationReport, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io_path(parent, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(report)?).map_err(|e| Error::io_path(path, e))
}

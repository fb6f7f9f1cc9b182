//! Command implementations behind the CLI binary. Each command reads the
//! experiment config, writes its outputs under `output_dir`, and collects
//! per-item failures instead of aborting the whole batch on the first one.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment::{self, AugmentationKind, AugmentationSpec};
use crate::chart::line_chart;
use crate::config::ExperimentConfig;
use crate::generate::{DecodeMode, GenerationConfig};
use crate::manifest::{
    parse_manifest, split_dataset, synthesize_toy_dataset, write_manifest, write_toy_corpus,
    ManifestEntry, SplitReport, WordSpan,
};
use crate::model::{
    build_frontend, freeze_layers_except_top_k, graft, plan_trainability, AdaptedModel,
    BackboneHandle, FrontendConfig, Tokenizer, TrainabilityPlan,
};
use crate::report::{evaluate_corpus, noise_baseline};
use crate::signal::{preprocess, read_recording, write_recording};
use crate::train::{
    load_checkpoint, save_checkpoint, subsample_data_ratio, train, MetricsCsv, RunState, Sample,
};
use crate::{Error, Result};

/// Per-item outcome of a batch command: how many items succeeded and which
/// failed with what error.
#[derive(Debug, Default, Clone)]
pub struct CommandReport {
    pub processed: usize,
    pub failures: Vec<(String, String)>,
}

impl CommandReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, item: impl Into<String>, err: &Error) {
        self.failures.push((item.into(), err.to_string()));
    }
}

fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("data")
}

fn segments_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("segments")
}

fn splits_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("splits")
}

fn run_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("run")
}

fn eval_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("eval")
}

/// Signal paths inside a manifest resolve relative to the manifest's
/// parent directory; absolute paths pass through.
fn resolve_signal_path(manifest: &Path, signal_path: &str) -> PathBuf {
    let p = PathBuf::from(signal_path);
    if p.is_absolute() {
        p
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Generates the synthetic corpus under `output_dir/data` and returns the
/// path of its manifest.
pub fn cmd_toy_gen(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let toy = cfg
        .dataset
        .toy
        .as_ref()
        .ok_or_else(|| Error::config("no [dataset.toy] section: nothing to generate"))?;
    let (recordings, mut entries) =
        synthesize_toy_dataset(toy.sentences, toy.repeats, toy.channels, toy.rate_hz, toy.seed)?;
    write_toy_corpus(&data_dir(cfg), &recordings, &mut entries)
}

/// Path of the dataset manifest: the configured one, or the generated toy
/// corpus (built on demand).
pub fn dataset_manifest(cfg: &ExperimentConfig) -> Result<PathBuf> {
    if let Some(path) = &cfg.dataset.manifest {
        return Ok(path.clone());
    }
    let generated = data_dir(cfg).join("manifest.jsonl");
    if generated.exists() {
        return Ok(generated);
    }
    cmd_toy_gen(cfg)
}

fn rebase_word_spans(spans: &[WordSpan], offset_s: f64, duration_s: f64) -> Vec<WordSpan> {
    spans
        .iter()
        .map(|w| WordSpan {
            word: w.word.clone(),
            start_s: (w.start_s - offset_s).clamp(0.0, duration_s),
            end_s: (w.end_s - offset_s).clamp(0.0, duration_s),
        })
        .collect()
}

/// Filters, resamples and scales every recording, cuts out the annotated
/// segment, and writes one `.ntr` file per entry plus `segments.jsonl`.
pub fn cmd_preprocess(cfg: &ExperimentConfig) -> Result<(PathBuf, CommandReport)> {
    let manifest = dataset_manifest(cfg)?;
    let entries = parse_manifest(&manifest)?;
    let dir = segments_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io_path(&dir, e))?;

    let mut report = CommandReport::default();
    let mut out_entries = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let item = format!("entry {i} ({})", entry.signal_path);
        let run = || -> Result<ManifestEntry> {
            let rec = read_recording(&resolve_signal_path(&manifest, &entry.signal_path))?;
            let clean = preprocess(&rec, &cfg.preprocess)?;
            let seg = crate::manifest::segment_recording(&clean, entry)?;
            let name = format!("seg_{i:05}.ntr");
            write_recording(&dir.join(&name), &seg)?;
            Ok(ManifestEntry {
                signal_path: name,
                signal_rate_hz: seg.sample_rate_hz,
                duration_s: seg.duration_s(),
                language: entry.language.clone(),
                sentence: entry.sentence.clone(),
                word_spans: rebase_word_spans(&entry.word_spans, entry.start_s, seg.duration_s()),
                subject_id: entry.subject_id.clone(),
                session_id: entry.session_id.clone(),
                story_id: entry.story_id.clone(),
                start_s: 0.0,
                end_s: seg.duration_s(),
            })
        };
        match run() {
            Ok(e) => {
                out_entries.push(e);
                report.processed += 1;
            }
            Err(e) => report.fail(item, &e),
        }
    }
    if out_entries.is_empty() {
        return Err(Error::config("preprocessing produced no usable segments"));
    }
    let seg_manifest = dir.join("segments.jsonl");
    write_manifest(&seg_manifest, &out_entries)?;
    Ok((seg_manifest, report))
}

/// Splits the preprocessed segments (or, if none exist, the raw dataset)
/// into train/val/test manifests plus a summary report.
pub fn cmd_split(cfg: &ExperimentConfig) -> Result<(PathBuf, SplitReport)> {
    let seg_manifest = segments_dir(cfg).join("segments.jsonl");
    let source = if seg_manifest.exists() { seg_manifest } else { dataset_manifest(cfg)? };
    let entries = parse_manifest(&source)?;
    // keep signal paths valid from the splits directory
    let entries: Vec<ManifestEntry> = entries
        .into_iter()
        .map(|mut e| {
            e.signal_path =
                resolve_signal_path(&source, &e.signal_path).to_string_lossy().into_owned();
            e
        })
        .collect();
    let (train_e, val_e, test_e) = split_dataset(&entries, &cfg.dataset.split)?;
    let dir = splits_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io_path(&dir, e))?;
    write_manifest(&dir.join("train.jsonl"), &train_e)?;
    write_manifest(&dir.join("val.jsonl"), &val_e)?;
    write_manifest(&dir.join("test.jsonl"), &test_e)?;
    let report = SplitReport {
        strategy: cfg.dataset.split.strategy,
        seed: cfg.dataset.split.seed,
        train: train_e.len(),
        val: val_e.len(),
        test: test_e.len(),
    };
    let report_path = dir.join("split_report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .map_err(|e| Error::io_path(&report_path, e))?;
    Ok((dir, report))
}

fn load_split(cfg: &ExperimentConfig, name: &str) -> Result<(PathBuf, Vec<ManifestEntry>)> {
    let path = splits_dir(cfg).join(format!("{name}.jsonl"));
    if !path.exists() {
        return Err(Error::config(format!(
            "{} not found: run the split command first",
            path.display()
        )));
    }
    let entries = parse_manifest(&path)?;
    Ok((path, entries))
}

fn entry_language(entry: &ManifestEntry, fallback: &str) -> String {
    if entry.language.is_empty() {
        fallback.to_string()
    } else {
        entry.language.to_lowercase()
    }
}

/// Vocabulary comes from the training sentences; language tags cover every
/// split so evaluation prompts are always encodable.
fn build_tokenizer(cfg: &ExperimentConfig, splits: &[&[ManifestEntry]]) -> Result<Tokenizer> {
    let train = splits.first().ok_or_else(|| Error::config("tokenizer needs a training split"))?;
    let mut languages: Vec<String> = splits
        .iter()
        .flat_map(|s| s.iter())
        .map(|e| entry_language(e, &cfg.dataset.language))
        .collect();
    languages.push(cfg.dataset.language.to_lowercase());
    languages.sort();
    languages.dedup();
    let refs: Vec<&str> = languages.iter().map(|s| s.as_str()).collect();
    Tokenizer::from_corpus(train.iter().map(|e| e.sentence.as_str()), &refs)
}

/// Turns manifest entries into training samples, optionally applying the
/// configured augmentations with a per-entry derived seed.
fn build_samples(
    entries: &[ManifestEntry],
    manifest: &Path,
    tokenizer: &Tokenizer,
    fallback_language: &str,
    window: usize,
    augmentations: &[AugmentationSpec],
    augment_seed: Option<u64>,
    report: &mut CommandReport,
) -> Vec<Sample> {
    let mut out = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let item = format!("entry {i} ({})", entry.signal_path);
        let run = || -> Result<Sample> {
            let mut rec = read_recording(&resolve_signal_path(manifest, &entry.signal_path))?;
            let mut entry = entry.clone();
            if let Some(seed) = augment_seed {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E3779B97F4A7C15));
                for spec in augmentations {
                    let (r, e) = augment::apply(&rec, &entry, spec, &mut rng)?;
                    rec = r;
                    entry = e;
                }
            }
            let language = entry_language(&entry, fallback_language);
            Sample::from_recording(&rec, &entry.sentence, tokenizer, &language, window)
        };
        match run() {
            Ok(s) => {
                out.push(s);
                report.processed += 1;
            }
            Err(e) => report.fail(item, &e),
        }
    }
    out
}

fn build_model(
    backbone: &str,
    tokenizer: Tokenizer,
    language: &str,
    in_channels: usize,
    frontend_seed: u64,
    plan: &TrainabilityPlan,
) -> Result<AdaptedModel> {
    let handle = BackboneHandle::new(backbone, tokenizer, language)?;
    let window = handle.window_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(frontend_seed);
    let frontend =
        build_frontend(FrontendConfig { in_channels, d_model: handle.spec.d_model }, &mut rng)?;
    let mut model = graft(handle, frontend, window)?;
    plan_trainability(&mut model, plan)?;
    Ok(model)
}

#[derive(Debug)]
pub struct TrainOutputs {
    pub run_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub metrics_csv: PathBuf,
    pub state: RunState,
    pub report: CommandReport,
}

/// Trains a fresh model on the train split, checkpointing the best epoch.
/// Writes `config.toml`, `metrics.csv`, `run_state.json` and `checkpoint/`
/// under `output_dir/run`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainOutputs> {
    cfg.validate()?;
    let (train_path, train_entries) = load_split(cfg, "train")?;
    let (val_path, val_entries) = load_split(cfg, "val")?;
    let tokenizer = build_tokenizer(cfg, &[&train_entries, &val_entries])?;
    let spec = crate::model::backbone_spec(&cfg.model.backbone)?;
    let window = spec.frame_capacity * 2;

    let mut report = CommandReport::default();
    let train_samples = build_samples(
        &train_entries,
        &train_path,
        &tokenizer,
        &cfg.dataset.language,
        window,
        &cfg.augmentation,
        Some(cfg.train.seed),
        &mut report,
    );
    let val_samples = build_samples(
        &val_entries,
        &val_path,
        &tokenizer,
        &cfg.dataset.language,
        window,
        &[],
        None,
        &mut report,
    );
    if train_samples.is_empty() || val_samples.is_empty() {
        return Err(Error::config("train and validation splits must yield samples"));
    }
    let train_samples = if cfg.train.data_ratio < 1.0 {
        subsample_data_ratio(&train_samples, cfg.train.data_ratio, cfg.train.seed)?
    } else {
        train_samples
    };

    let in_channels = cfg.model.in_channels.unwrap_or_else(|| train_samples[0].input.ncols());
    let mut model = build_model(
        &cfg.model.backbone,
        tokenizer,
        &cfg.dataset.language.to_lowercase(),
        in_channels,
        cfg.model.frontend_seed,
        &cfg.model.plan,
    )?;

    let run = run_dir(cfg);
    fs::create_dir_all(&run).map_err(|e| Error::io_path(&run, e))?;
    cfg.save(&run.join("config.toml"))?;
    let mut csv = MetricsCsv::create(&run.join("metrics.csv"))?;
    let state = train(&mut model, &train_samples, &val_samples, &cfg.train, |e, t, v| {
        csv.record(e, t, v);
    })?;
    let metrics_csv = csv.finish()?;

    let checkpoint_dir = run.join("checkpoint");
    save_checkpoint(&mut model, &cfg.model.plan, &checkpoint_dir, state.best_val_loss, state.best_epoch)?;
    let state_path = run.join("run_state.json");
    fs::write(&state_path, serde_json::to_string_pretty(&state)?)
        .map_err(|e| Error::io_path(&state_path, e))?;
    Ok(TrainOutputs { run_dir: run, checkpoint_dir, metrics_csv, state, report })
}

#[derive(Debug)]
pub struct EvalOutputs {
    /// (label, report path) per decode mode / baseline.
    pub reports: Vec<(String, PathBuf)>,
    pub report: CommandReport,
}

fn mode_label(mode: DecodeMode) -> &'static str {
    match mode {
        DecodeMode::FreeRun => "free_run",
        DecodeMode::TeacherForcing => "teacher_forcing",
    }
}

/// Evaluates a checkpoint on the test split in the requested decode modes,
/// optionally adding the Gaussian-noise input baseline. Writes one JSON
/// report and one plain-text transcript file per mode under
/// `output_dir/eval`.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    modes: &[DecodeMode],
    with_noise_baseline: bool,
) -> Result<EvalOutputs> {
    let default_ckpt = run_dir(cfg).join("checkpoint");
    let ckpt = checkpoint.unwrap_or(&default_ckpt);
    let (model, _meta) = load_checkpoint(ckpt)?;
    let (test_path, test_entries) = load_split(cfg, "test")?;

    let mut report = CommandReport::default();
    let samples = build_samples(
        &test_entries,
        &test_path,
        model.tokenizer(),
        &cfg.dataset.language,
        model.window_samples,
        &[],
        None,
        &mut report,
    );
    if samples.is_empty() {
        return Err(Error::config("test split yielded no samples"));
    }
    let segments: Vec<Array2<f32>> = samples.iter().map(|s| s.input.clone()).collect();
    let references: Vec<String> = samples.iter().map(|s| s.sentence.clone()).collect();

    let dir = eval_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io_path(&dir, e))?;
    let mut outputs = Vec::new();
    let mut write_one = |label: &str, rep: &crate::report::EvaluationReport| -> Result<()> {
        let path = dir.join(format!("report_{label}.json"));
        crate::train::write_report(rep, &path)?;
        let transcripts = dir.join(format!("transcripts_{label}.txt"));
        fs::write(&transcripts, rep.transcripts_text())
            .map_err(|e| Error::io_path(&transcripts, e))?;
        outputs.push((label.to_string(), path));
        Ok(())
    };
    for &mode in modes {
        let gen_cfg = GenerationConfig { mode, ..cfg.eval.clone() };
        let rep = evaluate_corpus(&model, &segments, &references, &gen_cfg)?;
        write_one(mode_label(mode), &rep)?;
    }
    if with_noise_baseline {
        let gen_cfg = GenerationConfig { mode: DecodeMode::FreeRun, ..cfg.eval.clone() };
        let rep = noise_baseline(&model, &segments, &references, &gen_cfg, cfg.eval.seed)?;
        write_one("noise", &rep)?;
    }
    Ok(EvalOutputs { reports: outputs, report })
}

/// The supported ablation sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Scaling,
    Augmentation,
    DataRatio,
    Layers,
}

impl SweepKind {
    pub fn parse(s: &str) -> Result<SweepKind> {
        match s {
            "scaling" => Ok(SweepKind::Scaling),
            "augmentation" => Ok(SweepKind::Augmentation),
            "data_ratio" => Ok(SweepKind::DataRatio),
            "layers" => Ok(SweepKind::Layers),
            other => Err(Error::config(format!(
                "unknown sweep '{other}' (known: scaling, augmentation, data_ratio, layers)"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            SweepKind::Scaling => "scaling",
            SweepKind::Augmentation => "augmentation",
            SweepKind::DataRatio => "data_ratio",
            SweepKind::Layers => "layers",
        }
    }
}

#[derive(Debug)]
pub struct AblateOutputs {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub report: CommandReport,
}

struct AblateRow {
    setting: String,
    bleu1: Option<f64>,
    effective_epochs: Option<usize>,
    error: Option<String>,
}

/// One sweep variant: trains a fresh model and scores free-run BLEU-1 on
/// the validation samples.
fn run_variant(
    cfg: &ExperimentConfig,
    tokenizer: &Tokenizer,
    backbone: &str,
    plan_top_k: Option<usize>,
    train_samples: &[Sample],
    val_samples: &[Sample],
) -> Result<(f64, usize)> {
    let in_channels = cfg.model.in_channels.unwrap_or_else(|| train_samples[0].input.ncols());
    let mut model = build_model(
        backbone,
        tokenizer.clone(),
        &cfg.dataset.language.to_lowercase(),
        in_channels,
        cfg.model.frontend_seed,
        &cfg.model.plan,
    )?;
    if let Some(k) = plan_top_k {
        freeze_layers_except_top_k(&mut model, k)?;
    }
    let state = train(&mut model, train_samples, val_samples, &cfg.train, |_, _, _| {})?;
    let segments: Vec<Array2<f32>> = val_samples.iter().map(|s| s.input.clone()).collect();
    let references: Vec<String> = val_samples.iter().map(|s| s.sentence.clone()).collect();
    let gen_cfg = GenerationConfig { mode: DecodeMode::FreeRun, ..cfg.eval.clone() };
    let rep = evaluate_corpus(&model, &segments, &references, &gen_cfg)?;
    Ok((rep.bleu[0], state.epoch))
}

fn default_augmentation_grid() -> Vec<(String, Vec<AugmentationSpec>)> {
    let mk = |kind, ratio, snr_db| AugmentationSpec {
        kind,
        ratio,
        snr_db,
        max_shift_s: 0.0,
        probability: 1.0,
        seed: 0,
    };
    vec![
        ("none".to_string(), vec![]),
        ("time_mask_0.1".to_string(), vec![mk(AugmentationKind::TimeMask, 0.1, 0.0)]),
        ("channel_mask_0.1".to_string(), vec![mk(AugmentationKind::ChannelMask, 0.1, 0.0)]),
        ("noise_10db".to_string(), vec![mk(AugmentationKind::Noise, 0.0, 10.0)]),
    ]
}

/// Runs one ablation sweep and writes `{sweep}.csv` and `{sweep}.svg`
/// under `output_dir/ablate`. Variant failures become rows with an error
/// column, not command failures.
pub fn cmd_ablate(cfg: &ExperimentConfig, sweep: SweepKind) -> Result<AblateOutputs> {
    cfg.validate()?;
    let (train_path, train_entries) = load_split(cfg, "train")?;
    let (val_path, val_entries) = load_split(cfg, "val")?;
    let tokenizer = build_tokenizer(cfg, &[&train_entries, &val_entries])?;
    let spec = crate::model::backbone_spec(&cfg.model.backbone)?;
    let window = spec.frame_capacity * 2;

    let mut report = CommandReport::default();
    let base_train = build_samples(
        &train_entries,
        &train_path,
        &tokenizer,
        &cfg.dataset.language,
        window,
        &[],
        None,
        &mut report,
    );
    let val_samples = build_samples(
        &val_entries,
        &val_path,
        &tokenizer,
        &cfg.dataset.language,
        window,
        &[],
        None,
        &mut report,
    );
    if base_train.is_empty() || val_samples.is_empty() {
        return Err(Error::config("ablation needs non-empty train and validation splits"));
    }

    let mut rows: Vec<AblateRow> = Vec::new();
    let mut record = |setting: String, outcome: Result<(f64, usize)>| match outcome {
        Ok((bleu1, epochs)) => rows.push(AblateRow {
            setting,
            bleu1: Some(bleu1),
            effective_epochs: Some(epochs),
            error: None,
        }),
        Err(e) => rows.push(AblateRow {
            setting,
            bleu1: None,
            effective_epochs: None,
            error: Some(e.to_string()),
        }),
    };

    match sweep {
        SweepKind::Scaling => {
            // every toy size shares the same frame capacity, so the window
            // and therefore the samples are reusable across rows
            for size in ["toy-tiny", "toy-base", "toy-small"] {
                let out = run_variant(cfg, &tokenizer, size, None, &base_train, &val_samples);
                record(size.to_string(), out);
            }
        }
        SweepKind::Augmentation => {
            let grid = if cfg.augmentation.is_empty() {
                default_augmentation_grid()
            } else {
                let mut g = vec![("none".to_string(), vec![])];
                for (i, spec) in cfg.augmentation.iter().enumerate() {
                    g.push((format!("aug_{i}_{:?}", spec.kind).to_lowercase(), vec![spec.clone()]));
                }
                g
            };
            for (label, specs) in grid {
                let mut r = CommandReport::default();
                let train_samples = build_samples(
                    &train_entries,
                    &train_path,
                    &tokenizer,
                    &cfg.dataset.language,
                    window,
                    &specs,
                    Some(cfg.train.seed),
                    &mut r,
                );
                report.failures.extend(r.failures);
                let out = run_variant(
                    cfg,
                    &tokenizer,
                    &cfg.model.backbone,
                    None,
                    &train_samples,
                    &val_samples,
                );
                record(label, out);
            }
        }
        SweepKind::DataRatio => {
            for ratio in [0.25, 0.5, 1.0] {
                let out = subsample_data_ratio(&base_train, ratio, cfg.train.seed).and_then(
                    |subset| {
                        run_variant(
                            cfg,
                            &tokenizer,
                            &cfg.model.backbone,
                            None,
                            &subset,
                            &val_samples,
                        )
                    },
                );
                record(format!("{ratio}"), out);
            }
        }
        SweepKind::Layers => {
            for k in 0..=spec.encoder_layers {
                let out =
                    run_variant(cfg, &tokenizer, &cfg.model.backbone, Some(k), &base_train, &val_samples);
                record(format!("top_{k}"), out);
            }
        }
    }

    let dir = cfg.output_dir.join("ablate");
    fs::create_dir_all(&dir).map_err(|e| Error::io_path(&dir, e))?;
    let csv_path = dir.join(format!("{}.csv", sweep.name()));
    {
        let file = fs::File::create(&csv_path).map_err(|e| Error::io_path(&csv_path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["setting", "bleu1", "effective_epochs", "error"])
            .map_err(|e| Error::Eval(e.to_string()))?;
        for row in &rows {
            w.write_record([
                row.setting.clone(),
                row.bleu1.map(|b| format!("{b:?}")).unwrap_or_default(),
                row.effective_epochs.map(|e| e.to_string()).unwrap_or_default(),
                row.error.clone().unwrap_or_default(),
            ])
            .map_err(|e| Error::Eval(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io_path(&csv_path, e))?;
    }

    let points: Vec<(f64, f64)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.bleu1.map(|b| (i as f64, b)))
        .collect();
    let ticks: Vec<String> = rows.iter().map(|r| r.setting.clone()).collect();
    let svg_path = dir.join(format!("{}.svg", sweep.name()));
    let title = format!("BLEU-1 by {} (data: {}.csv)", sweep.name(), sweep.name());
    if points.is_empty() {
        // every variant failed: no chart, but the CSV records why
        report.fail(
            format!("{} chart", sweep.name()),
            &Error::Eval("all sweep variants failed; see the CSV error column".to_string()),
        );
    } else {
        line_chart(&svg_path, &title, sweep.name(), "BLEU-1 (%)", &[("bleu1".to_string(), points)], Some(&ticks))?;
    }
    Ok(AblateOutputs { csv: csv_path, svg: svg_path, report })
}

//! Command-line entry point: drives the toy-gen / preprocess / split /
//! train / evaluate / ablate pipeline from one TOML experiment config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use neurotext::commands::{
    cmd_ablate, cmd_evaluate, cmd_preprocess, cmd_split, cmd_toy_gen, cmd_train, CommandReport,
    SweepKind,
};
use neurotext::config::ExperimentConfig;
use neurotext::generate::DecodeMode;
use neurotext::Result;

#[derive(Parser)]
#[command(name = "neurotext", version, about = "Train and evaluate text decoders over multichannel neural recordings")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "experiment.toml")]
    config: PathBuf,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Override the training / sampling seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FreeRun,
    TeacherForcing,
}

impl From<ModeArg> for DecodeMode {
    fn from(m: ModeArg) -> DecodeMode {
        match m {
            ModeArg::FreeRun => DecodeMode::FreeRun,
            ModeArg::TeacherForcing => DecodeMode::TeacherForcing,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Scaling,
    Augmentation,
    DataRatio,
    Layers,
}

impl From<SweepArg> for SweepKind {
    fn from(s: SweepArg) -> SweepKind {
        match s {
            SweepArg::Scaling => SweepKind::Scaling,
            SweepArg::Augmentation => SweepKind::Augmentation,
            SweepArg::DataRatio => SweepKind::DataRatio,
            SweepArg::Layers => SweepKind::Layers,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus under output_dir/data.
    ToyGen,
    /// Filter, resample, scale and segment every recording.
    Preprocess,
    /// Split the segments into train/val/test manifests.
    Split,
    /// Train a model on the train split and checkpoint the best epoch.
    Train,
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        /// Checkpoint directory (default: output_dir/run/checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Decode modes to score (default: both).
        #[arg(long, value_enum)]
        mode: Vec<ModeArg>,
        /// Also score the Gaussian-noise input baseline.
        #[arg(long)]
        baseline_noise: bool,
    },
    /// Run one ablation sweep and write its CSV + SVG chart.
    Ablate {
        #[arg(long, value_enum)]
        sweep: SweepArg,
    },
}

fn print_report(report: &CommandReport) -> bool {
    if !report.is_clean() {
        eprintln!("{} item(s) failed:", report.failures.len());
        for (item, err) in &report.failures {
            eprintln!("  {item}: {err}");
        }
    }
    report.is_clean()
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(dir) = cli.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
        cfg.eval.seed = seed;
    }
    match cli.command {
        Command::ToyGen => {
            let manifest = cmd_toy_gen(&cfg)?;
            println!("wrote {}", manifest.display());
            Ok(true)
        }
        Command::Preprocess => {
            let (manifest, report) = cmd_preprocess(&cfg)?;
            println!("wrote {} ({} segments)", manifest.display(), report.processed);
            Ok(print_report(&report))
        }
        Command::Split => {
            let (dir, report) = cmd_split(&cfg)?;
            println!(
                "wrote {} (train {} / val {} / test {})",
                dir.display(),
                report.train,
                report.val,
                report.test
            );
            Ok(true)
        }
        Command::Train => {
            let out = cmd_train(&cfg)?;
            println!(
                "trained {} epoch(s); best val loss {:.4} at epoch {}{}",
                out.state.epoch,
                out.state.best_val_loss,
                out.state.best_epoch,
                if out.state.stopped_early { " (stopped early)" } else { "" }
            );
            println!("checkpoint: {}", out.checkpoint_dir.display());
            println!("metrics: {}", out.metrics_csv.display());
            Ok(print_report(&out.report))
        }
        Command::Evaluate { checkpoint, mode, baseline_noise } => {
            let modes: Vec<DecodeMode> = if mode.is_empty() {
                vec![DecodeMode::FreeRun, DecodeMode::TeacherForcing]
            } else {
                mode.into_iter().map(DecodeMode::from).collect()
            };
            let out = cmd_evaluate(&cfg, checkpoint.as_deref(), &modes, baseline_noise)?;
            for (label, path) in &out.reports {
                println!("{label}: {}", path.display());
            }
            Ok(print_report(&out.report))
        }
        Command::Ablate { sweep } => {
            let out = cmd_ablate(&cfg, sweep.into())?;
            println!("csv: {}", out.csv.display());
            println!("chart: {}", out.svg.display());
            Ok(print_report(&out.report))
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

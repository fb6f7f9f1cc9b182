//! Experiment configuration: one TOML file holding every knob of the
//! pipeline so a run is fully auditable from its config snapshot.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationSpec;
use crate::generate::GenerationConfig;
use crate::manifest::SplitSpec;
use crate::model::{backbone_spec, TrainabilityPlan};
use crate::signal::PreprocessConfig;
use crate::train::TrainConfig;
use crate::{Error, Result};

/// Parameters of the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub sentences: usize,
    pub repeats: usize,
    pub channels: usize,
    pub rate_hz: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { sentences: 20, repeats: 30, channels: 8, rate_hz: 200.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// jsonl manifest; signal paths inside it resolve relative to its
    /// parent directory.
    pub manifest: Option<PathBuf>,
    /// Synthetic corpus parameters; used when no manifest is given.
    pub toy: Option<ToyConfig>,
    pub language: String,
    pub split: SplitSpec,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            manifest: None,
            toy: Some(ToyConfig::default()),
            language: "en".to_string(),
            split: SplitSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub backbone: String,
    /// Input channel count; defaults to the dataset's channel count.
    pub in_channels: Option<usize>,
    pub plan: TrainabilityPlan,
    /// Seed for the frontend's from-scratch initialization.
    pub frontend_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            backbone: "toy-tiny".to_string(),
            in_channels: None,
            plan: TrainabilityPlan::default(),
            frontend_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub preprocess: PreprocessConfig,
    pub augmentation: Vec<AugmentationSpec>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: GenerationConfig,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dataset.manifest.is_none() && self.dataset.toy.is_none() {
            return Err(Error::config("dataset needs either a manifest path or toy parameters"));
        }
        if self.dataset.language.is_empty() {
            return Err(Error::config("dataset language must be set"));
        }
        self.preprocess.validate()?;
        for a in &self.augmentation {
            a.validate()?;
        }
        backbone_spec(&self.model.backbone)?;
        self.model.plan.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir must be set"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io_path(path, e))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes with every default made explicit, so the stored snapshot
    /// is self-describing.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io_path(parent, e))?;
        }
        fs::write(path, self.to_toml()?).map_err(|e| Error::io_path(path, e))
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{GeneratorConfig, PreprocessConfig};
use crate::domain::{ReferenceRanges, Target, VISIT_SLOTS};
use crate::error::{Error, Result};
use crate::lstm::{ModelConfig, TrainConfig};
use crate::perturb::PerturbationSpec;

/// `[preprocess]` table; reference ranges live at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    pub slot_days: [u32; VISIT_SLOTS],
    pub target_day: u32,
    pub min_history_days: u32,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let d = PreprocessConfig::default();
        Self {
            slot_days: d.slot_days,
            target_day: d.target_day,
            min_history_days: d.min_history_days,
        }
    }
}

/// Full experiment description; every key is optional and unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub runs: usize,
    pub targets: Vec<Target>,
    /// Patients assigned to the training split; the rest form the test set.
    pub train_n: usize,
    pub sweep_deltas: Vec<f64>,
    /// Δx used to build the supplemental training set.
    pub augment_delta_t: f64,
    /// Ingest this visit CSV instead of generating a synthetic cohort.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visits_csv: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub preprocess: PreprocessSection,
    /// Sign policy, feature mask and base seed of the test-set perturbation.
    /// `delta_x` is replaced by each sweep value.
    pub perturbation: PerturbationSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub reference_ranges: ReferenceRanges,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 2021,
            runs: 10,
            targets: Target::ALL.to_vec(),
            train_n: 1960,
            sweep_deltas: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.08, 0.1, 0.15, 0.2],
            augment_delta_t: 0.05,
            visits_csv: None,
            generator: GeneratorConfig::default(),
            preprocess: PreprocessSection::default(),
            perturbation: PerturbationSpec::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            reference_ranges: ReferenceRanges::default(),
        }
    }
}

fn cfg_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ExperimentConfig {
    /// The reduced profile: 200 patients, 2 runs, 20 epochs.
    pub fn ci_profile() -> Self {
        Self {
            runs: 2,
            train_n: 160,
            generator: GeneratorConfig {
                n_patients: 200,
                ..Default::default()
            },
            train: TrainConfig {
                epochs: 20,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(cfg_err)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(cfg_err)
    }

    pub fn preprocess_config(&self) -> PreprocessConfig {
        PreprocessConfig {
            slot_days: self.preprocess.slot_days,
            target_day: self.preprocess.target_day,
            min_history_days: self.preprocess.min_history_days,
            reference_ranges: self.reference_ranges.clone(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be ≥ 1".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config(
                "targets must name at least one of tsh, trab".into(),
            ));
        }
        let mut t = self.targets.clone();
        t.sort();
        t.dedup();
        if t.len() != self.targets.len() {
            return Err(Error::Config("targets contains duplicates".into()));
        }
        if self.sweep_deltas.is_empty() {
            return Err(Error::Config("sweep_deltas is empty".into()));
        }
        if self
            .sweep_deltas
            .iter()
            .any(|d| !(d.is_finite() && *d >= 0.0 && *d < 1.0))
        {
            return Err(Error::Config("sweep_deltas must lie in [0, 1)".into()));
        }
        if self.sweep_deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "sweep_deltas must be strictly increasing".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.augment_delta_t) {
            return Err(Error::Config(format!(
                "augment_delta_t {} outside [0, 1)",
                self.augment_delta_t
            )));
        }
        let seeds = [
            self.master_seed,
            self.generator.seed,
            self.perturbation.seed,
        ];
        if seeds.iter().any(|s| *s > i64::MAX as u64) {
            return Err(Error::Config(
                "seeds must fit in a signed 64-bit integer".into(),
            ));
        }
        if self.perturbation.features.is_empty() {
            return Err(Error::Config("perturbation.features is empty".into()));
        }
        self.generator.check()?;
        self.preprocess_config().check()?;
        self.model.check()?;
        self.train.check()?;
        Ok(())
    }
}

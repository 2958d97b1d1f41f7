//! LSTM regressor written directly on `ndarray`: truncated-normal
//! initialization, batched forward pass, backpropagation through time,
//! Adam, inverted dropout and a versioned binary artifact.
//!
//! Architecture: a linear input projection (`input_dim → H`), `L` stacked
//! LSTM layers of `H` units, dropout on every layer's hidden output, and a
//! scalar head on the top layer's final-step output.

mod adam;
mod artifact;
mod model;
mod network;
mod params;

use serde::{Deserialize, Serialize};

use crate::domain::Target;
use crate::error::{Error, Result};

pub use adam::{adam_step, AdamState};
pub use artifact::{load, save, FORMAT_VERSION, MAGIC};
pub use model::{
    encode_series, predict, predict_batch, train, train_with_history, ModelArtifact, Normalization,
    FEATURE_NAMES,
};
pub use network::{forward, loss_and_grad, Forward, Mode};
pub use params::{init_params, LstmParams, ParamLayout, TensorSpan};

/// Number of model inputs per step: sex, age, FT3, FT4, TSH, TRAb.
pub const INPUT_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    #[serde(skip)]
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub init_stddev: f64,
    /// Truncation bound in multiples of `init_stddev`.
    pub init_truncation: f64,
    #[serde(skip)]
    pub target: Target,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: INPUT_DIM,
            hidden_layers: 2,
            hidden_units: 128,
            dropout_rate: 0.2,
            init_stddev: 0.1,
            init_truncation: 2.0,
            target: Target::Tsh,
        }
    }
}

impl ModelConfig {
    pub fn for_target(&self, target: Target) -> Self {
        Self {
            target,
            ..self.clone()
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.input_dim, self.hidden_units, self.hidden_layers)
    }

    pub fn check(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_units == 0 || self.hidden_layers == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "model.dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.init_stddev > 0.0 && self.init_stddev.is_finite()) {
            return Err(Error::Config(format!(
                "model.init_stddev {} must be > 0",
                self.init_stddev
            )));
        }
        if !(self.init_truncation > 0.0 && self.init_truncation.is_finite()) {
            return Err(Error::Config(format!(
                "model.init_truncation {} must be > 0",
                self.init_truncation
            )));
        }
        Ok(())
    }
}

/// Optimizer and schedule. The loss is always MSE on z-scored targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Experiments derive this per run; it is not read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 32,
            epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.adam_beta1) || !unit(self.adam_beta2) {
            return Err(Error::Config("adam betas must lie in (0, 1)".into()));
        }
        if self.adam_epsilon.is_nan()
            || self.adam_epsilon <= 0.0
            || self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
        {
            return Err(Error::Config(
                "learning_rate and adam_epsilon must be > 0".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be ≥ 1".into()));
        }
        Ok(())
    }
}

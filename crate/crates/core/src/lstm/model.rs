use ndarray::Array2;
use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState};
use super::network::{forward, loss_and_grad, Mode};
use super::params::{init_params, LstmParams};
use super::{ModelConfig, TrainConfig, INPUT_DIM};
use crate::domain::{Analyte, Dataset, LabSeries, Target, VISIT_SLOTS};
use crate::error::{Error, Result};
use crate::seed;

/// Column order of the model input.
pub const FEATURE_NAMES: [&str; INPUT_DIM] = ["sex", "age_years", "ft3", "ft4", "tsh", "trab"];

/// z-score statistics computed on the training set.
///
/// Sex is already encoded as {0, 1} and passes through with mean 0, std 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Normalization {
    pub fn fit(data: &Dataset, target: Target) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Training("empty training set".into()));
        }
        let mut mean = vec![0.0; INPUT_DIM];
        let mut std = vec![1.0; INPUT_DIM];
        mean[0] = 0.0;
        for col in 1..INPUT_DIM {
            let values: Vec<f64> = data
                .records
                .iter()
                .flat_map(|r| raw_rows(&r.series).into_iter().map(move |row| row[col]))
                .collect();
            let (m, s) = mean_std(&values);
            if s.is_nan() || s <= 0.0 {
                return Err(Error::Training(format!(
                    "feature {} has zero variance",
                    FEATURE_NAMES[col]
                )));
            }
            mean[col] = m;
            std[col] = s;
        }
        let targets: Vec<f64> = data.records.iter().map(|r| r.target(target)).collect();
        let (target_mean, s) = mean_std(&targets);
        // a constant target normalizes to zero
        let target_std = if s > 0.0 { s } else { 1.0 };
        Ok(Self {
            feature_mean: mean,
            feature_std: std,
            target_mean,
            target_std,
        })
    }

    fn identity() -> Self {
        Self {
            feature_mean: vec![0.0; INPUT_DIM],
            feature_std: vec![1.0; INPUT_DIM],
            target_mean: 0.0,
            target_std: 1.0,
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn raw_rows(series: &LabSeries) -> Vec<[f64; INPUT_DIM]> {
    let sex = series.statics.sex.encode();
    let age = series.statics.age_years;
    series
        .visits
        .iter()
        .map(|v| {
            [
                sex,
                age,
                v.get(Analyte::Ft3),
                v.get(Analyte::Ft4),
                v.get(Analyte::Tsh),
                v.get(Analyte::Trab),
            ]
        })
        .collect()
}

/// Normalized `7 × INPUT_DIM` input matrix for one series.
pub fn encode_series(series: &LabSeries, norm: &Normalization) -> Result<Array2<f64>> {
    if series.visits.len() != VISIT_SLOTS {
        return Err(Error::domain(format!(
            "patient {} has {} visits; the model expects {VISIT_SLOTS}",
            series.patient_id,
            series.visits.len()
        )));
    }
    let rows = raw_rows(series);
    Ok(Array2::from_shape_fn((VISIT_SLOTS, INPUT_DIM), |(t, j)| {
        (rows[t][j] - norm.feature_mean[j]) / norm.feature_std[j]
    }))
}

/// Stacks encoded series into per-step `B × INPUT_DIM` matrices.
fn batch_steps(encoded: &[&Array2<f64>]) -> Vec<Array2<f64>> {
    (0..VISIT_SLOTS)
        .map(|t| Array2::from_shape_fn((encoded.len(), INPUT_DIM), |(b, j)| encoded[b][[t, j]]))
        .collect()
}

/// A trained regressor with everything needed to reproduce its predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub params: LstmParams,
    pub config: ModelConfig,
    pub normalization: Normalization,
    pub train_seed: u64,
    pub format_version: u32,
}

impl ModelArtifact {
    /// Wraps raw parameters with identity normalization.
    pub fn from_params(params: LstmParams, config: ModelConfig) -> Self {
        Self {
            params,
            config,
            normalization: Normalization::identity(),
            train_seed: 0,
            format_version: super::FORMAT_VERSION,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.config.check()?;
        if self.params.layout != self.config.layout() {
            return Err(Error::Format(
                "parameter layout does not match model config".into(),
            ));
        }
        let n = &self.normalization;
        let stds = n.feature_std.iter().chain(std::iter::once(&n.target_std));
        if n.feature_mean.len() != self.config.input_dim
            || n.feature_std.len() != self.config.input_dim
            || stds.clone().any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::Format(
                "normalization statistics are malformed".into(),
            ));
        }
        if !(n.feature_mean.iter().all(|m| m.is_finite()) && n.target_mean.is_finite()) {
            return Err(Error::Format(
                "normalization statistics are malformed".into(),
            ));
        }
        if !self.params.is_finite() {
            return Err(Error::Format("non-finite model parameter".into()));
        }
        Ok(())
    }
}

/// Epoch-mean training loss, in normalized units.
pub type LossHistory = Vec<f64>;

pub fn train(
    train_set: &Dataset,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<ModelArtifact> {
    train_with_history(train_set, model, config).map(|(a, _)| a)
}

pub fn train_with_history(
    train_set: &Dataset,
    model: &ModelConfig,
    config: &TrainConfig,
) -> Result<(ModelArtifact, LossHistory)> {
    model.check()?;
    config.check()?;
    if model.input_dim != INPUT_DIM {
        return Err(Error::Config(format!(
            "model.input_dim must be {INPUT_DIM}"
        )));
    }
    if train_set.len() < config.batch_size {
        return Err(Error::Training(format!(
            "training set of {} is smaller than batch size {}",
            train_set.len(),
            config.batch_size
        )));
    }
    let norm = Normalization::fit(train_set, model.target)?;
    let encoded: Vec<Array2<f64>> = train_set
        .records
        .iter()
        .map(|r| encode_series(&r.series, &norm))
        .collect::<Result<_>>()?;
    let targets: Vec<f64> = train_set
        .records
        .iter()
        .map(|r| (r.target(model.target) - norm.target_mean) / norm.target_std)
        .collect();

    let mut params = init_params(model, seed::derive(config.seed, &[seed::hash_str("init")]));
    let mut state = AdamState::new(params.data.len());
    let mut shuffle = seed::rng(seed::derive(config.seed, &[seed::hash_str("shuffle")]));
    let dropout_base = seed::derive(config.seed, &[seed::hash_str("dropout")]);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0u64;

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let xs: Vec<&Array2<f64>> = chunk.iter().map(|&i| &encoded[i]).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let mode = Mode::Train {
                dropout_rate: model.dropout_rate,
                seed: seed::derive(dropout_base, &[epoch as u64, bi as u64]),
            };
            let (loss, grads) = loss_and_grad(&params, &batch_steps(&xs), &ys, mode)
                .map_err(|e| Error::Training(format!("epoch {epoch} batch {bi}: {e}")))?;
            step += 1;
            adam_step(&mut params, &grads, &mut state, step, config);
            total += loss * chunk.len() as f64;
        }
        if !params.is_finite() {
            return Err(Error::Training(format!(
                "parameters diverged at epoch {epoch}"
            )));
        }
        history.push(total / encoded.len() as f64);
    }

    let artifact = ModelArtifact {
        params,
        config: model.clone(),
        normalization: norm,
        train_seed: config.seed,
        format_version: super::FORMAT_VERSION,
    };
    Ok((artifact, history))
}

/// Predictions in target units for many series at once.
pub fn predict_batch(artifact: &ModelArtifact, series: &[&LabSeries]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Ok(Vec::new());
    }
    let norm = &artifact.normalization;
    let encoded: Vec<Array2<f64>> = series
        .iter()
        .map(|s| encode_series(s, norm))
        .collect::<Result<_>>()?;
    let refs: Vec<&Array2<f64>> = encoded.iter().collect();
    let out = forward(&artifact.params, &batch_steps(&refs), Mode::Eval)?;
    Ok(out
        .output
        .iter()
        .map(|z| z * norm.target_std + norm.target_mean)
        .collect())
}

pub fn predict(artifact: &ModelArtifact, series: &LabSeries) -> Result<f64> {
    Ok(predict_batch(artifact, &[series])?[0])
}

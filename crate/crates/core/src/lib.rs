//! Measure how bounded measurement imprecision in clinical lab time series
//! propagates through a trained LSTM predictor.
//!
//! The crate covers the whole experiment: a seeded synthetic thyroid cohort
//! (or CSV ingestion), grid preprocessing, the multiplicative perturbation
//! model `x' = x(1 ± Δx)`, a from-scratch LSTM regressor, the output-drift
//! and label-consistency metrics, and a harness that sweeps Δx over repeated
//! training runs and writes plot-ready CSV reports.

pub mod cli;
pub mod data;
pub mod domain;
pub mod error;
pub mod harness;
pub mod lstm;
pub mod metrics;
pub mod perturb;
pub mod realfmt;
pub mod seed;

pub use error::{Error, Result};

//! Cohort construction: synthetic generation, CSV ingestion, grid
//! preprocessing and train/test splitting.

pub(crate) mod csv_io;
mod preprocess;
mod synth;

use std::collections::BTreeMap;

use crate::domain::{FeatureVector, StaticAttributes};

pub use csv_io::{
    ingest_csv, read_dataset_csv, write_dataset_csv, write_exclusions_csv, write_visits_csv,
    DATASET_HEADER, EXCLUSION_HEADER, VISIT_HEADER,
};
pub use preprocess::{preprocess, split, Exclusion, ExclusionRule, PreprocessConfig, Preprocessed};
pub use synth::{generate_synthetic, GeneratorConfig};

/// One measured visit before grid alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVisit {
    pub patient_id: String,
    /// Days since the patient's first visit.
    pub day: u32,
    pub features: FeatureVector,
}

/// Raw visits plus the per-patient static attributes that travel with them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCohort {
    pub visits: Vec<RawVisit>,
    pub statics: BTreeMap<String, StaticAttributes>,
}

impl RawCohort {
    pub fn patient_count(&self) -> usize {
        let mut ids: Vec<&str> = self.visits.iter().map(|v| v.patient_id.as_str()).collect();
        ids.extend(self.statics.keys().map(String::as_str));
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

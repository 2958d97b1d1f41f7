use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;

use super::{RawCohort, RawVisit};
use crate::domain::{
    validate_record, Analyte, Dataset, LabSeries, PatientRecord, Provenance, ReferenceRanges,
    EARLY_WINDOW_DAYS, VISIT_SLOTS,
};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub slot_days: [u32; VISIT_SLOTS],
    pub target_day: u32,
    pub min_history_days: u32,
    pub reference_ranges: ReferenceRanges,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            slot_days: [0, 30, 60, 90, 120, 150, 180],
            target_day: 730,
            min_history_days: 730,
            reference_ranges: ReferenceRanges::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn check(&self) -> Result<()> {
        if self.slot_days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "slot_days {:?} must be strictly increasing",
                self.slot_days
            )));
        }
        if self.slot_days[VISIT_SLOTS - 1] > EARLY_WINDOW_DAYS {
            return Err(Error::Config(format!(
                "slot_days must lie within [0, {EARLY_WINDOW_DAYS}]"
            )));
        }
        if self.target_day < self.min_history_days {
            return Err(Error::Config(format!(
                "target_day {} must be ≥ min_history_days {}",
                self.target_day, self.min_history_days
            )));
        }
        self.reference_ranges
            .check()
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExclusionRule {
    NoEarlyVisits,
    ShortHistory { min_days: u32 },
    PseudoHyperthyroidism,
    NoTargetVisit { min_days: u32 },
    MissingStatics,
    Invalid(String),
}

impl fmt::Display for ExclusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExclusionRule::NoEarlyVisits => {
                write!(f, "no visits in first {EARLY_WINDOW_DAYS} days")
            }
            ExclusionRule::ShortHistory { min_days } => write!(f, "history < {min_days} days"),
            ExclusionRule::PseudoHyperthyroidism => f.write_str("pseudo-hyperthyroidism filter"),
            ExclusionRule::NoTargetVisit { min_days } => {
                write!(f, "no visit at or after day {min_days}")
            }
            ExclusionRule::MissingStatics => f.write_str("missing static attributes"),
            ExclusionRule::Invalid(why) => write!(f, "invalid record: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub patient_id: String,
    pub rule: ExclusionRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub dataset: Dataset,
    pub excluded: Vec<Exclusion>,
}

/// Index of the visit nearest to `day`; ties go to the earlier visit.
/// `visits` must be sorted by day.
fn nearest(visits: &[&RawVisit], day: u32) -> usize {
    let mut best = 0;
    for (i, v) in visits.iter().enumerate().skip(1) {
        if v.day.abs_diff(day) < visits[best].day.abs_diff(day) {
            best = i;
        }
    }
    best
}

fn build_record(
    id: &str,
    visits: &[&RawVisit],
    cohort: &RawCohort,
    config: &PreprocessConfig,
) -> Result<PatientRecord, ExclusionRule> {
    let early: Vec<&RawVisit> = visits
        .iter()
        .copied()
        .filter(|v| v.day <= EARLY_WINDOW_DAYS)
        .collect();
    if early.is_empty() {
        return Err(ExclusionRule::NoEarlyVisits);
    }
    let span = visits[visits.len() - 1].day - visits[0].day;
    if span < config.min_history_days {
        return Err(ExclusionRule::ShortHistory {
            min_days: config.min_history_days,
        });
    }
    let trab_high = config.reference_ranges.get(Analyte::Trab).high;
    if !visits.iter().take(3).any(|v| v.features.trab > trab_high) {
        return Err(ExclusionRule::PseudoHyperthyroidism);
    }
    let late: Vec<&RawVisit> = visits
        .iter()
        .copied()
        .filter(|v| v.day >= config.min_history_days)
        .collect();
    if late.is_empty() {
        return Err(ExclusionRule::NoTargetVisit {
            min_days: config.min_history_days,
        });
    }
    let statics = *cohort
        .statics
        .get(id)
        .ok_or(ExclusionRule::MissingStatics)?;

    let chosen: Vec<&RawVisit> = config
        .slot_days
        .iter()
        .map(|&d| early[nearest(&early, d)])
        .collect();
    let target = late[nearest(&late, config.target_day)];
    let record = PatientRecord {
        series: LabSeries {
            patient_id: id.to_string(),
            statics,
            visits: chosen.iter().map(|v| v.features).collect(),
            visit_days: chosen.iter().map(|v| v.day).collect(),
        },
        target_tsh: target.features.tsh,
        target_trab: target.features.trab,
    };
    validate_record(&record).map_err(|vs| {
        ExclusionRule::Invalid(
            vs.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        )
    })?;
    Ok(record)
}

/// Applies the eligibility filters, aligns early visits onto the slot grid
/// and extracts the two-year targets. Records come out sorted by patient id.
pub fn preprocess(
    cohort: &RawCohort,
    config: &PreprocessConfig,
    provenance: Provenance,
    seed: Option<u64>,
) -> Result<Preprocessed> {
    config.check()?;
    let mut by_patient: BTreeMap<&str, Vec<&RawVisit>> = BTreeMap::new();
    for v in &cohort.visits {
        by_patient.entry(v.patient_id.as_str()).or_default().push(v);
    }
    for id in cohort.statics.keys() {
        by_patient.entry(id.as_str()).or_default();
    }

    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for (id, mut visits) in by_patient {
        visits.sort_by_key(|v| v.day);
        let outcome = if visits.is_empty() {
            Err(ExclusionRule::NoEarlyVisits)
        } else {
            build_record(id, &visits, cohort, config)
        };
        match outcome {
            Ok(r) => records.push(r),
            Err(rule) => excluded.push(Exclusion {
                patient_id: id.to_string(),
                rule,
            }),
        }
    }
    Ok(Preprocessed {
        dataset: Dataset::new(records, provenance, seed)?,
        excluded,
    })
}

/// Seeded shuffle, then the first `train_n` records train and the rest test.
pub fn split(dataset: &Dataset, train_n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if train_n > dataset.len() {
        return Err(Error::domain(format!(
            "train_n {train_n} exceeds dataset size {}",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    let pick = |idx: &[usize]| Dataset {
        records: idx.iter().map(|&i| dataset.records[i].clone()).collect(),
        provenance: dataset.provenance,
        seed: dataset.seed,
    };
    Ok((pick(&order[..train_n]), pick(&order[train_n..])))
}

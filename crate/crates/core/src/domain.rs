//! Shared domain types, reference-range labeling and record validation.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of slots in the early-visit grid.
pub const VISIT_SLOTS: usize = 7;
/// Last day (inclusive) of the early observation window.
pub const EARLY_WINDOW_DAYS: u32 = 180;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analyte {
    Ft3,
    Ft4,
    Tsh,
    Trab,
}

impl Analyte {
    pub const ALL: [Analyte; 4] = [Analyte::Ft3, Analyte::Ft4, Analyte::Tsh, Analyte::Trab];

    /// Position inside a [`FeatureVector`].
    pub fn index(self) -> usize {
        match self {
            Analyte::Ft3 => 0,
            Analyte::Ft4 => 1,
            Analyte::Tsh => 2,
            Analyte::Trab => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Analyte::Ft3 => "FT3",
            Analyte::Ft4 => "FT4",
            Analyte::Tsh => "TSH",
            Analyte::Trab => "TRAb",
        }
    }

    /// Lower-case key used in CSV headers and config files.
    pub fn key(self) -> &'static str {
        match self {
            Analyte::Ft3 => "ft3",
            Analyte::Ft4 => "ft4",
            Analyte::Tsh => "tsh",
            Analyte::Trab => "trab",
        }
    }
}

impl fmt::Display for Analyte {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One visit's lab panel: FT3, FT4 (pmol/L), TSH (mIU/L), TRAb (IU/L).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ft3: f64,
    pub ft4: f64,
    pub tsh: f64,
    pub trab: f64,
}

impl FeatureVector {
    pub fn new(ft3: f64, ft4: f64, tsh: f64, trab: f64) -> Self {
        Self {
            ft3,
            ft4,
            tsh,
            trab,
        }
    }

    pub fn get(&self, analyte: Analyte) -> f64 {
        self.as_array()[analyte.index()]
    }

    pub fn set(&mut self, analyte: Analyte, value: f64) {
        match analyte {
            Analyte::Ft3 => self.ft3 = value,
            Analyte::Ft4 => self.ft4 = value,
            Analyte::Tsh => self.tsh = value,
            Analyte::Trab => self.trab = value,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.ft3, self.ft4, self.tsh, self.trab]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// An analyte the model predicts at the two-year horizon.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Tsh,
    Trab,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Tsh, Target::Trab];

    pub fn analyte(self) -> Analyte {
        match self {
            Target::Tsh => Analyte::Tsh,
            Target::Trab => Analyte::Trab,
        }
    }

    pub fn key(self) -> &'static str {
        self.analyte().key()
    }

    pub fn parse(s: &str) -> Option<Target> {
        match s.to_ascii_lowercase().as_str() {
            "tsh" => Some(Target::Tsh),
            "trab" => Some(Target::Trab),
            _ => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    /// Model encoding: female 0, male 1.
    pub fn encode(self) -> f64 {
        match self {
            Sex::Female => 0.0,
            Sex::Male => 1.0,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Sex::Female => "F",
            Sex::Male => "M",
        }
    }

    pub fn from_code(s: &str) -> Option<Sex> {
        match s {
            "F" => Some(Sex::Female),
            "M" => Some(Sex::Male),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticAttributes {
    pub sex: Sex,
    pub age_years: f64,
}

/// A patient's early history on the fixed 7-slot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LabSeries {
    pub patient_id: String,
    pub statics: StaticAttributes,
    pub visits: Vec<FeatureVector>,
    /// Actual day of the visit that filled each slot.
    pub visit_days: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub series: LabSeries,
    pub target_tsh: f64,
    pub target_trab: f64,
}

impl PatientRecord {
    pub fn id(&self) -> &str {
        &self.series.patient_id
    }

    pub fn target(&self, target: Target) -> f64 {
        match target {
            Target::Tsh => self.target_tsh,
            Target::Trab => self.target_trab,
        }
    }
}

/// Closed interval of normal values for one analyte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRange {
    pub analyte: Analyte,
    pub low: f64,
    pub high: f64,
}

impl ReferenceRange {
    pub fn new(analyte: Analyte, low: f64, high: f64) -> Result<Self> {
        let r = Self { analyte, low, high };
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<()> {
        let ok =
            self.low.is_finite() && self.high.is_finite() && self.low > 0.0 && self.low < self.high;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "invalid {} reference range [{}, {}]",
                self.analyte, self.low, self.high
            )))
        }
    }

    pub fn tsh_default() -> Self {
        Self {
            analyte: Analyte::Tsh,
            low: 0.34,
            high: 5.6,
        }
    }

    /// Not a published value; the default used for synthetic labeling and eligibility.
    pub fn trab_default() -> Self {
        Self {
            analyte: Analyte::Trab,
            low: 0.30,
            high: 1.75,
        }
    }

    pub fn ft3_default() -> Self {
        Self {
            analyte: Analyte::Ft3,
            low: 3.1,
            high: 6.8,
        }
    }

    pub fn ft4_default() -> Self {
        Self {
            analyte: Analyte::Ft4,
            low: 12.0,
            high: 22.0,
        }
    }
}

/// The set of ranges an experiment labels with. Every analyte appears once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferenceRanges(Vec<ReferenceRange>);

impl Default for ReferenceRanges {
    fn default() -> Self {
        Self(vec![
            ReferenceRange::tsh_default(),
            ReferenceRange::trab_default(),
            ReferenceRange::ft3_default(),
            ReferenceRange::ft4_default(),
        ])
    }
}

impl ReferenceRanges {
    pub fn new(ranges: Vec<ReferenceRange>) -> Result<Self> {
        let r = Self(ranges);
        r.check()?;
        Ok(r)
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.0 {
            r.check()?;
            if !seen.insert(r.analyte) {
                return Err(Error::domain(format!(
                    "duplicate reference range for {}",
                    r.analyte
                )));
            }
        }
        for a in Analyte::ALL {
            if !seen.contains(&a) {
                return Err(Error::domain(format!("missing reference range for {a}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, analyte: Analyte) -> ReferenceRange {
        *self
            .0
            .iter()
            .find(|r| r.analyte == analyte)
            .expect("reference ranges are validated to cover every analyte")
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReferenceRange> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelClass {
    Low,
    Normal,
    High,
}

impl LabelClass {
    pub const ALL: [LabelClass; 3] = [LabelClass::Low, LabelClass::Normal, LabelClass::High];

    pub fn name(self) -> &'static str {
        match self {
            LabelClass::Low => "low",
            LabelClass::Normal => "normal",
            LabelClass::High => "high",
        }
    }
}

/// Labels a value against a closed reference interval.
pub fn label_of(value: f64, range: &ReferenceRange) -> Result<LabelClass> {
    if !value.is_finite() {
        return Err(Error::domain(format!(
            "cannot label non-finite {} value {value}",
            range.analyte
        )));
    }
    Ok(if value < range.low {
        LabelClass::Low
    } else if value > range.high {
        LabelClass::High
    } else {
        LabelClass::Normal
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Ingested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<PatientRecord>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate patient ids.
    pub fn new(
        records: Vec<PatientRecord>,
        provenance: Provenance,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id()) {
                return Err(Error::domain(format!("duplicate patient id {}", r.id())));
            }
        }
        Ok(Self {
            records,
            provenance,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id())
    }
}

/// One broken invariant found by [`validate_record`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    VisitCount(usize),
    DayCount { days: usize, visits: usize },
    NonPositive { visit: usize, analyte: Analyte },
    DayOrder { slot: usize },
    DayOutOfWindow { slot: usize, day: u32 },
    Age(f64),
    Target { analyte: Analyte, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VisitCount(n) => write!(f, "visit count {n} ≠ {VISIT_SLOTS}"),
            Violation::DayCount { days, visits } => {
                write!(f, "{days} visit days for {visits} visits")
            }
            Violation::NonPositive { visit, analyte } => {
                write!(f, "non-positive {analyte} at visit {}", visit + 1)
            }
            Violation::DayOrder { slot } => write!(f, "visit day decreases at slot {slot}"),
            Violation::DayOutOfWindow { slot, day } => {
                write!(f, "slot {slot} day {day} outside [0, {EARLY_WINDOW_DAYS}]")
            }
            Violation::Age(a) => write!(f, "age {a} outside (0, 120)"),
            Violation::Target { analyte, value } => {
                write!(f, "non-positive or non-finite target {analyte} {value}")
            }
        }
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Collects every invariant violation of a record; `Ok` iff there are none.
pub fn validate_record(record: &PatientRecord) -> Result<(), Vec<Violation>> {
    let s = &record.series;
    let mut out = Vec::new();
    if s.visits.len() != VISIT_SLOTS {
        out.push(Violation::VisitCount(s.visits.len()));
    }
    if s.visit_days.len() != s.visits.len() {
        out.push(Violation::DayCount {
            days: s.visit_days.len(),
            visits: s.visits.len(),
        });
    }
    for (i, v) in s.visits.iter().enumerate() {
        for a in Analyte::ALL {
            if !positive(v.get(a)) {
                out.push(Violation::NonPositive {
                    visit: i,
                    analyte: a,
                });
            }
        }
    }
    for (i, &d) in s.visit_days.iter().enumerate() {
        if d > EARLY_WINDOW_DAYS {
            out.push(Violation::DayOutOfWindow { slot: i, day: d });
        }
        if i > 0 && d < s.visit_days[i - 1] {
            out.push(Violation::DayOrder { slot: i });
        }
    }
    let age = s.statics.age_years;
    if !(age.is_finite() && age > 0.0 && age < 120.0) {
        out.push(Violation::Age(age));
    }
    for (a, v) in [
        (Analyte::Tsh, record.target_tsh),
        (Analyte::Trab, record.target_trab),
    ] {
        if !positive(v) {
            out.push(Violation::Target {
                analyte: a,
                value: v,
            });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

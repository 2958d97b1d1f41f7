//! Visit, dataset and exclusion CSV files.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use super::{Exclusion, RawCohort, RawVisit};
use crate::domain::{
    Dataset, FeatureVector, LabSeries, PatientRecord, Provenance, Sex, StaticAttributes,
};
use crate::error::{Error, Result};
use crate::realfmt::real;

pub const VISIT_HEADER: [&str; 8] = [
    "patient_id",
    "sex",
    "age_years",
    "day",
    "ft3",
    "ft4",
    "tsh",
    "trab",
];
pub const DATASET_HEADER: [&str; 11] = [
    "patient_id",
    "sex",
    "age_years",
    "slot_index",
    "slot_day",
    "ft3",
    "ft4",
    "tsh",
    "trab",
    "target_tsh",
    "target_trab",
];
pub const EXCLUSION_HEADER: [&str; 2] = ["patient_id", "rule"];

pub(crate) fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Row {
        line,
        message: e.to_string(),
    }
}

pub(crate) fn check_header(found: &StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = found.iter().collect();
    if got == expected {
        return Ok(());
    }
    let missing: Vec<&str> = expected
        .iter()
        .copied()
        .filter(|c| !got.contains(c))
        .collect();
    let extra: Vec<&str> = got
        .iter()
        .copied()
        .filter(|c| !expected.contains(c))
        .collect();
    let mut msg = format!("expected header `{}`", expected.join(","));
    if !missing.is_empty() {
        msg.push_str(&format!("; missing columns: {}", missing.join(", ")));
    }
    if !extra.is_empty() {
        msg.push_str(&format!("; unexpected columns: {}", extra.join(", ")));
    }
    if missing.is_empty() && extra.is_empty() {
        msg.push_str("; columns out of order");
    }
    Err(Error::Format(msg))
}

struct Row<'a> {
    rec: &'a StringRecord,
    line: u64,
    header: &'a [&'a str],
}

impl Row<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Row {
            line: self.line,
            message: message.into(),
        }
    }

    fn text(&self, col: usize) -> &str {
        self.rec.get(col).unwrap_or("")
    }

    fn real(&self, col: usize) -> Result<f64> {
        let s = self.text(col).trim();
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                self.err(format!(
                    "{} = {s:?} is not a finite number",
                    self.header[col]
                ))
            })
    }

    fn int(&self, col: usize) -> Result<u32> {
        let s = self.text(col).trim();
        s.parse::<u32>().map_err(|_| {
            self.err(format!(
                "{} = {s:?} is not a non-negative integer",
                self.header[col]
            ))
        })
    }

    fn sex(&self, col: usize) -> Result<Sex> {
        let s = self.text(col).trim();
        Sex::from_code(s).ok_or_else(|| self.err(format!("sex = {s:?} is not F or M")))
    }
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses the visit CSV. Rows for a patient may appear in any order.
pub fn ingest_csv<R: Read>(source: R) -> Result<RawCohort> {
    let mut rdr = ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = rdr.headers().map_err(csv_err)?.clone();
    check_header(&header, &VISIT_HEADER)?;

    let mut cohort = RawCohort::default();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = Row {
            rec: &rec,
            line: line_of(&rec),
            header: &VISIT_HEADER,
        };
        let id = row.text(0).trim().to_string();
        if id.is_empty() {
            return Err(row.err("empty patient_id"));
        }
        let statics = StaticAttributes {
            sex: row.sex(1)?,
            age_years: row.real(2)?,
        };
        let day = row.int(3)?;
        let features = FeatureVector::new(row.real(4)?, row.real(5)?, row.real(6)?, row.real(7)?);
        if !seen.insert((id.clone(), day)) {
            return Err(row.err(format!("duplicate visit for patient {id} on day {day}")));
        }
        match cohort.statics.get(&id) {
            Some(prev) if *prev != statics => {
                return Err(row.err(format!("patient {id} has inconsistent sex/age across rows")));
            }
            Some(_) => {}
            None => {
                cohort.statics.insert(id.clone(), statics);
            }
        }
        cohort.visits.push(RawVisit {
            patient_id: id,
            day,
            features,
        });
    }
    Ok(cohort)
}

pub fn write_visits_csv<W: Write>(out: W, cohort: &RawCohort) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    let io = |e: csv::Error| Error::Format(format!("writing visits: {e}"));
    w.write_record(VISIT_HEADER).map_err(io)?;
    for v in &cohort.visits {
        let s = cohort
            .statics
            .get(&v.patient_id)
            .ok_or_else(|| Error::domain(format!("no static attributes for {}", v.patient_id)))?;
        let f = v.features;
        w.write_record([
            v.patient_id.clone(),
            s.sex.code().to_string(),
            real(s.age_years),
            v.day.to_string(),
            real(f.ft3),
            real(f.ft4),
            real(f.tsh),
            real(f.trab),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Format(format!("writing visits: {e}")))
}

/// Writes the post-preprocessing dataset, 7 rows per patient.
pub fn write_dataset_csv<W: Write>(out: W, dataset: &Dataset) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    let io = |e: csv::Error| Error::Format(format!("writing dataset: {e}"));
    w.write_record(DATASET_HEADER).map_err(io)?;
    for r in &dataset.records {
        let s = &r.series;
        for (slot, (v, day)) in s.visits.iter().zip(&s.visit_days).enumerate() {
            w.write_record([
                s.patient_id.clone(),
                s.statics.sex.code().to_string(),
                real(s.statics.age_years),
                slot.to_string(),
                day.to_string(),
                real(v.ft3),
                real(v.ft4),
                real(v.tsh),
                real(v.trab),
                real(r.target_tsh),
                real(r.target_trab),
            ])
            .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Format(format!("writing dataset: {e}")))
}

/// Reads a dataset CSV written by [`write_dataset_csv`].
pub fn read_dataset_csv<R: Read>(source: R) -> Result<Dataset> {
    let mut rdr = ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = rdr.headers().map_err(csv_err)?.clone();
    check_header(&header, &DATASET_HEADER)?;

    let mut order: Vec<String> = Vec::new();
    let mut records: BTreeMap<String, PatientRecord> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = Row {
            rec: &rec,
            line: line_of(&rec),
            header: &DATASET_HEADER,
        };
        let id = row.text(0).trim().to_string();
        let statics = StaticAttributes {
            sex: row.sex(1)?,
            age_years: row.real(2)?,
        };
        let slot = row.int(3)? as usize;
        let day = row.int(4)?;
        let features = FeatureVector::new(row.real(5)?, row.real(6)?, row.real(7)?, row.real(8)?);
        let (tt, tr) = (row.real(9)?, row.real(10)?);
        let entry = records.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            PatientRecord {
                series: LabSeries {
                    patient_id: id.clone(),
                    statics,
                    visits: Vec::new(),
                    visit_days: Vec::new(),
                },
                target_tsh: tt,
                target_trab: tr,
            }
        });
        if slot != entry.series.visits.len() {
            return Err(row.err(format!("patient {id}: slot_index {slot} out of sequence")));
        }
        if entry.series.statics != statics || entry.target_tsh != tt || entry.target_trab != tr {
            return Err(row.err(format!(
                "patient {id}: per-patient columns differ between slots"
            )));
        }
        entry.series.visits.push(features);
        entry.series.visit_days.push(day);
    }
    let records = order
        .into_iter()
        .map(|id| records.remove(&id).expect("inserted"))
        .collect();
    Dataset::new(records, Provenance::Ingested, None)
}

pub fn write_exclusions_csv<W: Write>(out: W, excluded: &[Exclusion]) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    let io = |e: csv::Error| Error::Format(format!("writing exclusions: {e}"));
    w.write_record(EXCLUSION_HEADER).map_err(io)?;
    for e in excluded {
        w.write_record([e.patient_id.as_str(), &e.rule.to_string()])
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Format(format!("writing exclusions: {e}")))
}

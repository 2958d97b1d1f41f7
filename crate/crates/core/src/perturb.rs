//! Multiplicative imprecision model: every measured value `x` becomes
//! `x · (1 ± Δx)`.

use serde::{Deserialize, Serialize};

use crate::domain::{Analyte, Dataset, LabSeries, PatientRecord};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn from_bit(word: u64) -> Sign {
        if word & 1 == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPolicy {
    Plus,
    Minus,
    /// Independent seeded sign per (patient, visit, feature).
    RandomPerValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    pub delta_x: f64,
    pub sign_policy: SignPolicy,
    /// Analytes that receive the perturbation.
    pub features: Vec<Analyte>,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            delta_x: 0.0,
            sign_policy: SignPolicy::RandomPerValue,
            features: Analyte::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn with_delta(&self, delta_x: f64) -> Self {
        Self {
            delta_x,
            ..self.clone()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.delta_x >= 0.0 && self.delta_x.is_finite()) {
            return Err(Error::domain(format!(
                "delta_x {} must be finite and ≥ 0",
                self.delta_x
            )));
        }
        if self.features.is_empty() {
            return Err(Error::domain("perturbation feature mask is empty"));
        }
        if self.sign_policy != SignPolicy::Plus && self.delta_x >= 1.0 {
            return Err(Error::domain(format!(
                "delta_x {} ≥ 1 can make lab values non-positive",
                self.delta_x
            )));
        }
        Ok(())
    }

    fn sign_for(&self, patient: u64, visit: usize, analyte: Analyte) -> Sign {
        match self.sign_policy {
            SignPolicy::Plus => Sign::Plus,
            SignPolicy::Minus => Sign::Minus,
            SignPolicy::RandomPerValue => Sign::from_bit(seed::derive(
                self.seed,
                &[patient, visit as u64, analyte.index() as u64],
            )),
        }
    }
}

/// `x · (1 ± delta_x)` with a single rounding.
pub fn perturb_value(x: f64, delta_x: f64, sign: Sign) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::domain(format!(
            "cannot perturb non-positive or non-finite value {x}"
        )));
    }
    if !(delta_x >= 0.0 && delta_x.is_finite()) {
        return Err(Error::domain(format!(
            "delta_x {delta_x} must be finite and ≥ 0"
        )));
    }
    if sign == Sign::Minus && delta_x >= 1.0 {
        return Err(Error::domain(format!(
            "x·(1 − {delta_x}) is not a positive lab value"
        )));
    }
    Ok(x.mul_add(sign.factor() * delta_x, x))
}

/// Perturbs every masked analyte at every visit. Statics are left alone.
pub fn perturb_series(series: &LabSeries, spec: &PerturbationSpec) -> Result<LabSeries> {
    spec.check()?;
    let patient = seed::hash_str(&series.patient_id);
    let mut out = series.clone();
    for (i, visit) in out.visits.iter_mut().enumerate() {
        for &a in &spec.features {
            let v = perturb_value(visit.get(a), spec.delta_x, spec.sign_for(patient, i, a))?;
            visit.set(a, v);
        }
    }
    Ok(out)
}

/// Builds D′ from D. Targets are ground truth and stay unperturbed.
pub fn perturb_dataset(dataset: &Dataset, spec: &PerturbationSpec) -> Result<Dataset> {
    let records = dataset
        .records
        .iter()
        .map(|r| {
            Ok(PatientRecord {
                series: perturb_series(&r.series, spec)?,
                ..r.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        records,
        ..dataset.clone()
    })
}

/// Suffix appended to the ids of supplemental records.
pub const SUPPLEMENT_SUFFIX: &str = "~aug";

/// Original training set plus one shifted copy of each record: the copy is
/// `x(1 + Δt)` or `x(1 − Δt)` across all of its lab values, with the sign
/// drawn once per record.
pub fn make_supplemental(train: &Dataset, delta_t: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&delta_t) {
        return Err(Error::domain(format!(
            "augmentation delta {delta_t} must lie in [0, 1)"
        )));
    }
    let mut records = train.records.clone();
    for r in &train.records {
        let sign = Sign::from_bit(seed::derive(seed, &[seed::hash_str(r.id())]));
        let policy = match sign {
            Sign::Plus => SignPolicy::Plus,
            Sign::Minus => SignPolicy::Minus,
        };
        let spec = PerturbationSpec {
            delta_x: delta_t,
            sign_policy: policy,
            features: Analyte::ALL.to_vec(),
            seed,
        };
        let mut series = perturb_series(&r.series, &spec)?;
        series.patient_id = format!("{}{SUPPLEMENT_SUFFIX}", r.id());
        records.push(PatientRecord {
            series,
            ..r.clone()
        });
    }
    Dataset::new(records, train.provenance, train.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::record;
    use crate::domain::{label_of, LabelClass, Provenance, ReferenceRange};

    fn dataset(n: usize) -> Dataset {
        Dataset::new(
            (0..n).map(|i| record(&format!("p{i}"))).collect(),
            Provenance::Synthetic,
            Some(1),
        )
        .unwrap()
    }

    #[test]
    fn value_examples() {
        assert!((perturb_value(2.0, 0.05, Sign::Plus).unwrap() - 2.1).abs() < 1e-15);
        assert_eq!(perturb_value(3.7, 0.0, Sign::Minus).unwrap(), 3.7);
        let shifted = perturb_value(0.34, 0.01, Sign::Minus).unwrap();
        assert!((shifted - 0.3366).abs() < 1e-15);
        assert_eq!(
            label_of(shifted, &ReferenceRange::tsh_default()).unwrap(),
            LabelClass::Low
        );
    }

    #[test]
    fn minus_one_is_domain_error() {
        assert!(matches!(
            perturb_value(1.0, 1.0, Sign::Minus),
            Err(Error::Domain(_))
        ));
        assert!(perturb_value(1.0, 1.5, Sign::Plus).is_ok());
        assert!(perturb_value(0.0, 0.1, Sign::Plus).is_err());
    }

    #[test]
    fn zero_delta_is_identity() {
        let r = record("a");
        for policy in [
            SignPolicy::Plus,
            SignPolicy::Minus,
            SignPolicy::RandomPerValue,
        ] {
            let spec = PerturbationSpec {
                sign_policy: policy,
                ..Default::default()
            };
            assert_eq!(perturb_series(&r.series, &spec).unwrap(), r.series);
        }
    }

    #[test]
    fn plus_policy_scales_every_value() {
        let r = record("a");
        let spec = PerturbationSpec {
            delta_x: 0.01,
            sign_policy: SignPolicy::Plus,
            ..Default::default()
        };
        let out = perturb_series(&r.series, &spec).unwrap();
        for (o, i) in out.visits.iter().zip(&r.series.visits) {
            for (a, b) in o.as_array().iter().zip(i.as_array()) {
                assert_eq!(*a, b.mul_add(0.01, b));
            }
        }
        assert_eq!(out.statics, r.series.statics);
    }

    #[test]
    fn mask_limits_perturbed_features() {
        let r = record("a");
        let spec = PerturbationSpec {
            delta_x: 0.1,
            sign_policy: SignPolicy::Minus,
            features: vec![Analyte::Tsh],
            seed: 0,
        };
        let out = perturb_series(&r.series, &spec).unwrap();
        for (o, i) in out.visits.iter().zip(&r.series.visits) {
            assert_eq!((o.ft3, o.ft4, o.trab), (i.ft3, i.ft4, i.trab));
            assert_ne!(o.tsh, i.tsh);
        }
        assert!(perturb_series(
            &r.series,
            &PerturbationSpec {
                features: vec![],
                ..spec
            }
        )
        .is_err());
    }

    #[test]
    fn random_signs_are_exactly_five_percent_and_reproducible() {
        let d = dataset(30);
        let spec = PerturbationSpec {
            delta_x: 0.05,
            seed: 42,
            ..Default::default()
        };
        let p = perturb_dataset(&d, &spec).unwrap();
        assert_eq!(p, perturb_dataset(&d, &spec).unwrap());
        let (mut plus, mut minus) = (0, 0);
        for (a, b) in p.records.iter().zip(&d.records) {
            assert_eq!(a.id(), b.id());
            assert_eq!((a.target_tsh, a.target_trab), (b.target_tsh, b.target_trab));
            for (va, vb) in a.series.visits.iter().zip(&b.series.visits) {
                for (x1, x0) in va.as_array().iter().zip(vb.as_array()) {
                    let rel = (x1 - x0) / x0;
                    assert!((rel.abs() - 0.05).abs() < 1e-15, "{rel}");
                    if rel > 0.0 {
                        plus += 1
                    } else {
                        minus += 1
                    }
                }
            }
        }
        assert!(plus > 300 && minus > 300, "{plus}/{minus}");
    }

    #[test]
    fn supplemental_sign_is_per_record() {
        let d = dataset(40);
        let s = make_supplemental(&d, 0.05, 3).unwrap();
        assert_eq!(s.len(), 80);
        let mut signs = std::collections::HashSet::new();
        for (sup, orig) in s.records[40..].iter().zip(&d.records) {
            assert_eq!(sup.id(), format!("{}~aug", orig.id()));
            assert_eq!(sup.target_tsh, orig.target_tsh);
            let rels: Vec<f64> = sup
                .series
                .visits
                .iter()
                .zip(&orig.series.visits)
                .flat_map(|(a, b)| {
                    a.as_array()
                        .into_iter()
                        .zip(b.as_array())
                        .map(|(x1, x0)| (x1 - x0) / x0)
                })
                .collect();
            let positive = rels[0] > 0.0;
            assert!(rels
                .iter()
                .all(|r| (r > &0.0) == positive && (r.abs() - 0.05).abs() < 1e-15));
            signs.insert(positive);
        }
        assert_eq!(signs.len(), 2);
    }

    #[test]
    fn supplemental_zero_delta_duplicates() {
        let d = dataset(5);
        let s = make_supplemental(&d, 0.0, 3).unwrap();
        for (sup, orig) in s.records[5..].iter().zip(&d.records) {
            assert_eq!(sup.series.visits, orig.series.visits);
        }
        assert!(make_supplemental(&d, 1.0, 3).is_err());
    }
}

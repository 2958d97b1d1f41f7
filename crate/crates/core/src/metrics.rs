//! Output drift (Δy), one-vs-rest confusion sets, accuracy, and the paired
//! divergence counts between two labelings of the same cohort.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{label_of, LabelClass, ReferenceRange};
use crate::error::{Error, Result};

pub type IdSet = BTreeSet<String>;

/// Denominators below this (target units) make Δy undefined.
pub const DELTA_Y_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedPrediction {
    pub patient_id: String,
    pub y_base: f64,
    pub y_pert: f64,
    pub truth: f64,
    pub label_base: LabelClass,
    pub label_pert: LabelClass,
    pub label_truth: LabelClass,
}

impl PairedPrediction {
    pub fn new(
        patient_id: impl Into<String>,
        y_base: f64,
        y_pert: f64,
        truth: f64,
        range: &ReferenceRange,
    ) -> Result<Self> {
        Ok(Self {
            patient_id: patient_id.into(),
            y_base,
            y_pert,
            truth,
            label_base: label_of(y_base, range)?,
            label_pert: label_of(y_pert, range)?,
            label_truth: label_of(truth, range)?,
        })
    }
}

/// `(y_pert − y_base) / y_base`, or `None` when `|y_base|` is below [`DELTA_Y_GUARD`].
pub fn delta_y(y_base: f64, y_pert: f64) -> Option<f64> {
    if y_base.abs() < DELTA_Y_GUARD {
        None
    } else {
        Some((y_pert - y_base) / y_base)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    /// Mean of `|Δy| / Δx` over non-guarded pairs.
    pub mean: f64,
    pub median: f64,
    pub used: usize,
    pub guarded: usize,
}

pub fn propagation_ratio(pairs: &[PairedPrediction], delta_x: f64) -> Result<Propagation> {
    if delta_x.is_nan() || delta_x <= 0.0 {
        return Err(Error::domain(format!(
            "propagation ratio needs Δx > 0, got {delta_x}"
        )));
    }
    let mut ratios: Vec<f64> = pairs
        .iter()
        .filter_map(|p| delta_y(p.y_base, p.y_pert))
        .map(|d| d.abs() / delta_x)
        .collect();
    let guarded = pairs.len() - ratios.len();
    if ratios.is_empty() {
        return Err(Error::domain(
            "propagation ratio undefined: every pair is guarded",
        ));
    }
    ratios.sort_by(f64::total_cmp);
    let k = ratios.len();
    let median = if k % 2 == 1 {
        ratios[k / 2]
    } else {
        0.5 * (ratios[k / 2 - 1] + ratios[k / 2])
    };
    let mean = ratios.iter().sum::<f64>() / k as f64;
    Ok(Propagation {
        mean,
        median,
        used: k,
        guarded,
    })
}

/// One-vs-rest partition of the cohort for a single label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfusionSets {
    pub tp: IdSet,
    pub tn: IdSet,
    pub fp: IdSet,
    pub fn_: IdSet,
}

impl ConfusionSets {
    /// `TP ∪ TN`.
    pub fn correct(&self) -> IdSet {
        self.tp.union(&self.tn).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.tp.len() + self.tn.len() + self.fp.len() + self.fn_.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn universe(&self) -> IdSet {
        self.tp
            .iter()
            .chain(&self.tn)
            .chain(&self.fp)
            .chain(&self.fn_)
            .cloned()
            .collect()
    }
}

fn index(pairs: &[(String, LabelClass)], what: &str) -> Result<BTreeMap<String, LabelClass>> {
    let mut map = BTreeMap::new();
    for (id, l) in pairs {
        if map.insert(id.clone(), *l).is_some() {
            return Err(Error::domain(format!("duplicate id {id} in {what}")));
        }
    }
    Ok(map)
}

fn paired(
    preds: &[(String, LabelClass)],
    truths: &[(String, LabelClass)],
) -> Result<Vec<(String, LabelClass, LabelClass)>> {
    let p = index(preds, "predictions")?;
    let t = index(truths, "truths")?;
    if p.len() != t.len() || p.keys().zip(t.keys()).any(|(a, b)| a != b) {
        return Err(Error::domain(
            "predictions and truths cover different patients",
        ));
    }
    Ok(p.into_iter()
        .zip(t.into_values())
        .map(|((id, pl), tl)| (id, pl, tl))
        .collect())
}

pub fn confusion(
    preds: &[(String, LabelClass)],
    truths: &[(String, LabelClass)],
    label: LabelClass,
) -> Result<ConfusionSets> {
    let mut c = ConfusionSets::default();
    for (id, pred, truth) in paired(preds, truths)? {
        let set = match (truth == label, pred == label) {
            (true, true) => &mut c.tp,
            (false, false) => &mut c.tn,
            (false, true) => &mut c.fp,
            (true, false) => &mut c.fn_,
        };
        set.insert(id);
    }
    Ok(c)
}

/// `(|TP| + |TN|) / n`.
pub fn accuracy(conf: &ConfusionSets, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("accuracy undefined for an empty cohort"));
    }
    if conf.len() != n {
        return Err(Error::domain(format!(
            "confusion sets hold {} ids, n = {n}",
            conf.len()
        )));
    }
    Ok((conf.tp.len() + conf.tn.len()) as f64 / n as f64)
}

/// Ids whose predicted label equals the true label.
pub fn correct_set(
    preds: &[(String, LabelClass)],
    truths: &[(String, LabelClass)],
) -> Result<IdSet> {
    Ok(paired(preds, truths)?
        .into_iter()
        .filter(|(_, p, t)| p == t)
        .map(|(id, _, _)| id)
        .collect())
}

/// Fraction of ids with predicted label equal to the true label.
pub fn multiclass_accuracy(
    preds: &[(String, LabelClass)],
    truths: &[(String, LabelClass)],
) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::domain("accuracy undefined for an empty cohort"));
    }
    Ok(correct_set(preds, truths)?.len() as f64 / truths.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// Wrong under the base labeling, right under the other.
    pub n_minus_p: IdSet,
    /// Right under the base labeling, wrong under the other.
    pub p_minus_n: IdSet,
    pub count_gain: i64,
    pub count_inconsistent: usize,
    pub delta_accuracy: f64,
}

/// Divergence between two correctness sets over a cohort of `n`.
pub fn divergence_of_correct(base: &IdSet, other: &IdSet, n: usize) -> Result<DivergenceReport> {
    if n == 0 {
        return Err(Error::domain("divergence undefined for an empty cohort"));
    }
    let n_minus_p: IdSet = other.difference(base).cloned().collect();
    let p_minus_n: IdSet = base.difference(other).cloned().collect();
    let count_gain = n_minus_p.len() as i64 - p_minus_n.len() as i64;
    let count_inconsistent = n_minus_p.len() + p_minus_n.len();
    Ok(DivergenceReport {
        n_minus_p,
        p_minus_n,
        count_gain,
        count_inconsistent,
        delta_accuracy: count_gain as f64 / n as f64,
    })
}

pub fn divergence(
    conf_base: &ConfusionSets,
    conf_pert: &ConfusionSets,
    n: usize,
) -> Result<DivergenceReport> {
    if conf_base.len() != n || conf_pert.len() != n || conf_base.universe() != conf_pert.universe()
    {
        return Err(Error::domain("confusion sets are over different cohorts"));
    }
    divergence_of_correct(&conf_base.correct(), &conf_pert.correct(), n)
}

/// `Count_gain(f, h)`: how many more patients model `h` labels correctly than `f`.
pub fn model_gain(
    preds_f: &[(String, LabelClass)],
    preds_h: &[(String, LabelClass)],
    truths: &[(String, LabelClass)],
) -> Result<DivergenceReport> {
    let cf = correct_set(preds_f, truths)?;
    let ch = correct_set(preds_h, truths)?;
    divergence_of_correct(&cf, &ch, truths.len())
}

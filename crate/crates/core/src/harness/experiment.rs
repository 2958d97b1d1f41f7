use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::data::{generate_synthetic, ingest_csv, preprocess, split, Preprocessed, RawCohort};
use crate::domain::{label_of, Dataset, LabSeries, LabelClass, Provenance, ReferenceRange, Target};
use crate::error::{Error, Result};
use crate::lstm::{predict_batch, train, ModelArtifact, TrainConfig};
use crate::metrics::{
    accuracy, confusion, correct_set, divergence_of_correct, model_gain, propagation_ratio,
    PairedPrediction,
};
use crate::perturb::{make_supplemental, perturb_dataset};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    /// `f`, trained on the original training set.
    Baseline,
    /// `h`, trained on the original plus supplemental set.
    Augmented,
}

impl ModelKind {
    pub fn key(self) -> &'static str {
        match self {
            ModelKind::Baseline => "f",
            ModelKind::Augmented => "h",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f" => Some(ModelKind::Baseline),
            "h" => Some(ModelKind::Augmented),
            _ => None,
        }
    }
}

/// Metrics for one (model, target, Δx, run).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub model: ModelKind,
    pub target: Target,
    pub delta_x: f64,
    pub run: usize,
    pub n: usize,
    /// Pairs excluded from the Δy statistics by the near-zero guard.
    pub guarded: usize,
    /// Undefined at Δx = 0 or when every pair is guarded.
    pub mean_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    /// Multi-class accuracy on D and D′.
    pub accuracy_base: f64,
    pub accuracy_pert: f64,
    pub delta_accuracy: f64,
    pub n_minus_p: usize,
    pub p_minus_n: usize,
    pub count_gain: i64,
    pub count_inconsistent: usize,
    /// One-vs-rest accuracy per label (low, normal, high) on D and D′.
    pub label_accuracy: [(f64, f64); 3],
}

/// `Count_gain(f, h)` on the test set perturbed by `delta_x` (0 = original).
#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub target: Target,
    pub delta_x: f64,
    pub run: usize,
    pub n: usize,
    pub n_minus_p: usize,
    pub p_minus_n: usize,
    pub count_gain: i64,
    pub count_inconsistent: usize,
}

/// Per-patient divergence membership (run 1 only).
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipRow {
    pub model: ModelKind,
    pub target: Target,
    pub delta_x: f64,
    pub patient_id: String,
    /// `"n_minus_p"` or `"p_minus_n"`.
    pub set: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub run: usize,
    pub target: Target,
    pub model: ModelKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub gains: Vec<GainRow>,
    pub memberships: Vec<MembershipRow>,
    pub failures: Vec<RunFailure>,
    pub test_size: usize,
    pub train_size: usize,
}

impl AuditReport {
    pub fn has_augmented(&self) -> bool {
        self.rows.iter().any(|r| r.model == ModelKind::Augmented)
    }
}

/// Seeds for one run. They depend only on the master seed, the run index
/// and the target, never on the Δx grid or job scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub split: u64,
    pub perturb: u64,
    pub augment: u64,
    run: u64,
}

impl RunSeeds {
    pub fn train(&self, target: Target, model: ModelKind) -> u64 {
        seed::derive(
            self.run,
            &[
                seed::hash_str("train"),
                seed::hash_str(target.key()),
                seed::hash_str(model.key()),
            ],
        )
    }
}

/// `run` is 1-based.
pub fn run_seeds(config: &ExperimentConfig, run: usize) -> RunSeeds {
    let base = seed::derive(config.master_seed, &[run as u64]);
    RunSeeds {
        split: seed::derive(base, &[seed::hash_str("split")]),
        perturb: seed::derive(base, &[seed::hash_str("perturb"), config.perturbation.seed]),
        augment: seed::derive(base, &[seed::hash_str("augment")]),
        run: base,
    }
}

/// Generates or ingests the cohort and preprocesses it.
pub fn load_data(config: &ExperimentConfig) -> Result<(RawCohort, Preprocessed)> {
    let (cohort, provenance, seed) = match &config.visits_csv {
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            (
                ingest_csv(BufReader::new(file))?,
                Provenance::Ingested,
                None,
            )
        }
        None => (
            generate_synthetic(&config.generator)?,
            Provenance::Synthetic,
            Some(config.generator.seed),
        ),
    };
    let pre = preprocess(&cohort, &config.preprocess_config(), provenance, seed)?;
    Ok((cohort, pre))
}

type Labelled = (String, LabelClass);

struct Evaluation {
    base_labels: Vec<(String, LabelClass)>,
    /// Perturbed labels per Δx, in grid order.
    pert_labels: Vec<Vec<(String, LabelClass)>>,
}

fn labels(
    ids: &[String],
    values: &[f64],
    range: &ReferenceRange,
) -> Result<Vec<(String, LabelClass)>> {
    ids.iter()
        .zip(values)
        .map(|(id, v)| Ok((id.clone(), label_of(*v, range)?)))
        .collect()
}

struct TestView<'a> {
    ids: Vec<String>,
    base: Vec<&'a LabSeries>,
    /// D′ for every Δx of the grid.
    perturbed: &'a [Dataset],
    truth: Vec<(String, LabelClass)>,
    truth_values: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    model: &ModelArtifact,
    kind: ModelKind,
    target: Target,
    run: usize,
    deltas: &[f64],
    test: &TestView<'_>,
    range: &ReferenceRange,
    rows: &mut Vec<SweepRow>,
    memberships: &mut Vec<MembershipRow>,
) -> Result<Evaluation> {
    let n = test.ids.len();
    let y_base = predict_batch(model, &test.base)?;
    let base_labels = labels(&test.ids, &y_base, range)?;
    let correct_base = correct_set(&base_labels, &test.truth)?;
    let conf_base: Vec<_> = LabelClass::ALL
        .iter()
        .map(|&l| confusion(&base_labels, &test.truth, l))
        .collect::<Result<_>>()?;

    let mut pert_labels = Vec::with_capacity(deltas.len());
    for (&delta_x, pert) in deltas.iter().zip(test.perturbed) {
        let series: Vec<&LabSeries> = pert.records.iter().map(|r| &r.series).collect();
        let y_pert = predict_batch(model, &series)?;
        let pairs: Vec<PairedPrediction> = (0..n)
            .map(|i| {
                PairedPrediction::new(
                    test.ids[i].clone(),
                    y_base[i],
                    y_pert[i],
                    test.truth_values[i],
                    range,
                )
            })
            .collect::<Result<_>>()?;
        let ratio = if delta_x > 0.0 {
            propagation_ratio(&pairs, delta_x).ok()
        } else {
            None
        };
        let guarded = pairs
            .iter()
            .filter(|p| crate::metrics::delta_y(p.y_base, p.y_pert).is_none())
            .count();
        let plabels: Vec<(String, LabelClass)> = pairs
            .iter()
            .map(|p| (p.patient_id.clone(), p.label_pert))
            .collect();
        let correct_pert = correct_set(&plabels, &test.truth)?;
        let div = divergence_of_correct(&correct_base, &correct_pert, n)?;
        let mut label_accuracy = [(0.0, 0.0); 3];
        for (k, &l) in LabelClass::ALL.iter().enumerate() {
            let cp = confusion(&plabels, &test.truth, l)?;
            label_accuracy[k] = (accuracy(&conf_base[k], n)?, accuracy(&cp, n)?);
        }
        if run == 1 {
            for (set, ids) in [("n_minus_p", &div.n_minus_p), ("p_minus_n", &div.p_minus_n)] {
                for id in ids {
                    memberships.push(MembershipRow {
                        model: kind,
                        target,
                        delta_x,
                        patient_id: id.clone(),
                        set,
                    });
                }
            }
        }
        rows.push(SweepRow {
            model: kind,
            target,
            delta_x,
            run,
            n,
            guarded,
            mean_ratio: ratio.as_ref().map(|r| r.mean),
            median_ratio: ratio.as_ref().map(|r| r.median),
            accuracy_base: correct_base.len() as f64 / n as f64,
            accuracy_pert: correct_pert.len() as f64 / n as f64,
            delta_accuracy: div.delta_accuracy,
            n_minus_p: div.n_minus_p.len(),
            p_minus_n: div.p_minus_n.len(),
            count_gain: div.count_gain,
            count_inconsistent: div.count_inconsistent,
            label_accuracy,
        });
        pert_labels.push(plabels);
    }
    Ok(Evaluation {
        base_labels,
        pert_labels,
    })
}

#[derive(Default)]
struct JobOutput {
    rows: Vec<SweepRow>,
    gains: Vec<GainRow>,
    memberships: Vec<MembershipRow>,
    failures: Vec<RunFailure>,
}

fn train_config(config: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..config.train.clone()
    }
}

fn run_job(
    config: &ExperimentConfig,
    data: &Dataset,
    run: usize,
    target: Target,
    augmented: bool,
) -> Result<JobOutput> {
    let seeds = run_seeds(config, run);
    let (train_set, test) = split(data, config.train_n, seeds.split)?;
    if test.is_empty() {
        return Err(Error::domain("test split is empty"));
    }
    let range = config.reference_ranges.get(target.analyte());
    let deltas = &config.sweep_deltas;
    let perturbed: Vec<Dataset> = deltas
        .iter()
        .map(|&d| {
            let spec = crate::perturb::PerturbationSpec {
                seed: seeds.perturb,
                ..config.perturbation.with_delta(d)
            };
            perturb_dataset(&test, &spec)
        })
        .collect::<Result<_>>()?;
    let view = TestView {
        ids: test.ids().map(str::to_string).collect(),
        base: test.records.iter().map(|r| &r.series).collect(),
        perturbed: &perturbed,
        truth: test
            .records
            .iter()
            .map(|r| Ok((r.id().to_string(), label_of(r.target(target), &range)?)))
            .collect::<Result<_>>()?,
        truth_values: test.records.iter().map(|r| r.target(target)).collect(),
    };

    let mut out = JobOutput::default();
    let model_config = config.model.for_target(target);
    let fail = |kind: ModelKind, e: Error| RunFailure {
        run,
        target,
        model: kind,
        message: e.to_string(),
    };

    let f = match train(
        &train_set,
        &model_config,
        &train_config(config, seeds.train(target, ModelKind::Baseline)),
    ) {
        Ok(m) => m,
        Err(e) => {
            out.failures.push(fail(ModelKind::Baseline, e));
            return Ok(out);
        }
    };
    let eval_f = evaluate(
        &f,
        ModelKind::Baseline,
        target,
        run,
        deltas,
        &view,
        &range,
        &mut out.rows,
        &mut out.memberships,
    )?;
    if !augmented {
        return Ok(out);
    }

    let combined = make_supplemental(&train_set, config.augment_delta_t, seeds.augment)?;
    let h = match train(
        &combined,
        &model_config,
        &train_config(config, seeds.train(target, ModelKind::Augmented)),
    ) {
        Ok(m) => m,
        Err(e) => {
            out.failures.push(fail(ModelKind::Augmented, e));
            return Ok(out);
        }
    };
    let eval_h = evaluate(
        &h,
        ModelKind::Augmented,
        target,
        run,
        deltas,
        &view,
        &range,
        &mut out.rows,
        &mut out.memberships,
    )?;

    // Count_gain(f, h) on the original test set and on each D′
    let mut grid: Vec<(f64, &[Labelled], &[Labelled])> =
        vec![(0.0, &eval_f.base_labels, &eval_h.base_labels)];
    for (k, &d) in deltas.iter().enumerate() {
        if d > 0.0 {
            grid.push((d, &eval_f.pert_labels[k], &eval_h.pert_labels[k]));
        }
    }
    for (delta_x, lf, lh) in grid {
        let g = model_gain(lf, lh, &view.truth)?;
        out.gains.push(GainRow {
            target,
            delta_x,
            run,
            n: view.ids.len(),
            n_minus_p: g.n_minus_p.len(),
            p_minus_n: g.p_minus_n.len(),
            count_gain: g.count_gain,
            count_inconsistent: g.count_inconsistent,
        });
    }
    Ok(out)
}

fn run_experiment(config: &ExperimentConfig, augmented: bool) -> Result<AuditReport> {
    config.check()?;
    let (_, pre) = load_data(config)?;
    let data = pre.dataset;
    if config.train_n > data.len() {
        return Err(Error::domain(format!(
            "train_n {} exceeds the {} retained patients",
            config.train_n,
            data.len()
        )));
    }
    let jobs: Vec<(usize, Target)> = (1..=config.runs)
        .flat_map(|run| config.targets.iter().map(move |&t| (run, t)))
        .collect();
    let outputs: Vec<JobOutput> = jobs
        .par_iter()
        .map(|&(run, target)| run_job(config, &data, run, target, augmented))
        .collect::<Result<_>>()?;

    let mut report = AuditReport {
        config: config.clone(),
        rows: Vec::new(),
        gains: Vec::new(),
        memberships: Vec::new(),
        failures: Vec::new(),
        test_size: data.len() - config.train_n,
        train_size: config.train_n,
    };
    for o in outputs {
        report.rows.extend(o.rows);
        report.gains.extend(o.gains);
        report.memberships.extend(o.memberships);
        report.failures.extend(o.failures);
    }
    // canonical order regardless of how jobs were scheduled
    let target_pos = |t: Target| {
        config
            .targets
            .iter()
            .position(|x| *x == t)
            .unwrap_or(usize::MAX)
    };
    report.rows.sort_by(|a, b| {
        (a.model, target_pos(a.target), a.run)
            .cmp(&(b.model, target_pos(b.target), b.run))
            .then(a.delta_x.total_cmp(&b.delta_x))
    });
    report.gains.sort_by(|a, b| {
        (target_pos(a.target), a.run)
            .cmp(&(target_pos(b.target), b.run))
            .then(a.delta_x.total_cmp(&b.delta_x))
    });
    report.memberships.sort_by(|a, b| {
        (a.model, target_pos(a.target))
            .cmp(&(b.model, target_pos(b.target)))
            .then(a.delta_x.total_cmp(&b.delta_x))
            .then(a.set.cmp(b.set))
            .then(a.patient_id.cmp(&b.patient_id))
    });
    report
        .failures
        .sort_by_key(|f| (f.run, target_pos(f.target), f.model));
    Ok(report)
}

/// Δx sweep with the baseline model only.
pub fn run_sweep(config: &ExperimentConfig) -> Result<AuditReport> {
    run_experiment(config, false)
}

/// Baseline sweep plus the augmented model `h` and `Count_gain(f, h)`.
pub fn run_augmented(config: &ExperimentConfig) -> Result<AuditReport> {
    run_experiment(config, true)
}

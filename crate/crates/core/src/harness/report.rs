use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use super::config::ExperimentConfig;
use super::experiment::{AuditReport, GainRow, ModelKind, SweepRow};
use crate::data::csv_io::{check_header, csv_err};
use crate::domain::Target;
use crate::error::{Error, Result};
use crate::realfmt::{opt_real, real};

pub const SWEEP_HEADER: [&str; 21] = [
    "model",
    "target",
    "delta_x",
    "run",
    "n",
    "guarded",
    "mean_ratio",
    "median_ratio",
    "accuracy_base",
    "accuracy_pert",
    "delta_accuracy",
    "n_minus_p",
    "p_minus_n",
    "count_gain",
    "count_inconsistent",
    "accuracy_low_base",
    "accuracy_low_pert",
    "accuracy_normal_base",
    "accuracy_normal_pert",
    "accuracy_high_base",
    "accuracy_high_pert",
];

pub const GAIN_HEADER: [&str; 8] = [
    "target",
    "delta_x",
    "run",
    "n",
    "n_minus_p",
    "p_minus_n",
    "count_gain",
    "count_inconsistent",
];

pub const SUMMARY_HEADER: [&str; 24] = [
    "model",
    "target",
    "delta_x",
    "runs",
    "guarded",
    "mean_ratio_mean",
    "mean_ratio_min",
    "mean_ratio_max",
    "mean_ratio_std",
    "median_ratio_mean",
    "accuracy_mean",
    "accuracy_min",
    "accuracy_max",
    "accuracy_std",
    "delta_accuracy_mean",
    "delta_accuracy_min",
    "delta_accuracy_max",
    "count_inconsistent_mean",
    "count_inconsistent_min",
    "count_inconsistent_max",
    "count_gain_mean",
    "accuracy_low_mean",
    "accuracy_normal_mean",
    "accuracy_high_mean",
];

pub const FIG2_HEADER: [&str; 5] = ["target", "delta_x", "mean_ratio", "min_ratio", "max_ratio"];
pub const FIG3_HEADER: [&str; 8] = [
    "target",
    "delta_x",
    "mean_accuracy",
    "min_accuracy",
    "max_accuracy",
    "mean_accuracy_low",
    "mean_accuracy_normal",
    "mean_accuracy_high",
];
pub const FIG4_HEADER: [&str; 7] = [
    "target",
    "delta_x",
    "mean_count_inconsistent",
    "min_count_inconsistent",
    "max_count_inconsistent",
    "mean_count_gain",
    "mean_delta_accuracy",
];
pub const FIG5_HEADER: [&str; 8] = [
    "target",
    "delta_x",
    "mean_count_gain_f_h",
    "min_count_gain_f_h",
    "max_count_gain_f_h",
    "mean_inconsistent_f",
    "mean_inconsistent_h",
    "h_not_decreased",
];
pub const DIVERGENCE_HEADER: [&str; 5] = ["model", "target", "delta_x", "patient_id", "set"];
pub const FAILURE_HEADER: [&str; 4] = ["run", "target", "model", "message"];
pub const RANGES_HEADER: [&str; 3] = ["analyte", "low", "high"];

/// Mean, extremes and sample standard deviation over runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean,
            min,
            max,
            std,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub target: Target,
    pub delta_x: f64,
    pub runs: usize,
    pub guarded: usize,
    /// Over runs that produced a defined ratio.
    pub mean_ratio: Option<Stat>,
    pub median_ratio: Option<Stat>,
    pub accuracy: Stat,
    pub delta_accuracy: Stat,
    pub count_inconsistent: Stat,
    pub count_gain: Stat,
    pub label_accuracy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSummary {
    pub target: Target,
    pub delta_x: f64,
    pub runs: usize,
    pub count_gain: Stat,
    pub count_inconsistent: Stat,
}

/// Rounds through the CSV representation so that aggregates computed here
/// and aggregates recomputed from the written file agree to the bit.
fn q(x: f64) -> f64 {
    real(x).parse().unwrap_or(x)
}

fn stat(values: impl Iterator<Item = f64>) -> Stat {
    let v: Vec<f64> = values.map(q).collect();
    Stat::of(&v).unwrap_or(Stat {
        mean: f64::NAN,
        min: f64::NAN,
        max: f64::NAN,
        std: f64::NAN,
    })
}

fn target_order<'a>(targets: impl Iterator<Item = &'a Target>) -> Vec<Target> {
    let mut order = Vec::new();
    for t in targets {
        if !order.contains(t) {
            order.push(*t);
        }
    }
    order
}

/// Per (model, target, Δx) aggregates; order follows first appearance of each target.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let order = target_order(rows.iter().map(|r| &r.target));
    let mut groups: BTreeMap<(ModelKind, usize, u64), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        let t = order.iter().position(|x| *x == r.target).unwrap_or(0);
        groups
            .entry((r.model, t, q(r.delta_x).to_bits()))
            .or_default()
            .push(r);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_values()
        .map(|g| {
            let ratio = |f: fn(&SweepRow) -> Option<f64>| {
                let v: Vec<f64> = g.iter().filter_map(|r| f(r)).map(q).collect();
                Stat::of(&v)
            };
            SummaryRow {
                model: g[0].model,
                target: g[0].target,
                delta_x: q(g[0].delta_x),
                runs: g.len(),
                guarded: g.iter().map(|r| r.guarded).sum(),
                mean_ratio: ratio(|r| r.mean_ratio),
                median_ratio: ratio(|r| r.median_ratio),
                accuracy: stat(g.iter().map(|r| r.accuracy_pert)),
                delta_accuracy: stat(g.iter().map(|r| r.delta_accuracy)),
                count_inconsistent: stat(g.iter().map(|r| r.count_inconsistent as f64)),
                count_gain: stat(g.iter().map(|r| r.count_gain as f64)),
                label_accuracy: [0, 1, 2]
                    .map(|k| stat(g.iter().map(|r| r.label_accuracy[k].1)).mean),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        let ta = order.iter().position(|x| *x == a.target);
        let tb = order.iter().position(|x| *x == b.target);
        (a.model, ta)
            .cmp(&(b.model, tb))
            .then(a.delta_x.total_cmp(&b.delta_x))
    });
    out
}

pub fn summarize_gains(gains: &[GainRow]) -> Vec<GainSummary> {
    let order = target_order(gains.iter().map(|r| &r.target));
    let mut groups: BTreeMap<(usize, u64), Vec<&GainRow>> = BTreeMap::new();
    for r in gains {
        let t = order.iter().position(|x| *x == r.target).unwrap_or(0);
        groups
            .entry((t, q(r.delta_x).to_bits()))
            .or_default()
            .push(r);
    }
    let mut out: Vec<GainSummary> = groups
        .into_values()
        .map(|g| GainSummary {
            target: g[0].target,
            delta_x: q(g[0].delta_x),
            runs: g.len(),
            count_gain: stat(g.iter().map(|r| r.count_gain as f64)),
            count_inconsistent: stat(g.iter().map(|r| r.count_inconsistent as f64)),
        })
        .collect();
    out.sort_by(|a, b| {
        let ta = order.iter().position(|x| *x == a.target);
        let tb = order.iter().position(|x| *x == b.target);
        ta.cmp(&tb).then(a.delta_x.total_cmp(&b.delta_x))
    });
    out
}

struct CsvOut {
    path: PathBuf,
    w: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = CsvOut {
            w: WriterBuilder::new().from_writer(BufWriter::new(file)),
            path,
        };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.w
            .write_record(&fields)
            .map_err(|e| Error::Format(format!("writing {}: {e}", self.path.display())))
    }

    fn finish(self) -> Result<PathBuf> {
        let path = self.path;
        self.w
            .into_inner()
            .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))?
            .flush()
            .map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<PathBuf> {
    let mut out = CsvOut::create(dir, "sweep.csv", &SWEEP_HEADER)?;
    for r in rows {
        let la = r.label_accuracy;
        out.row([
            r.model.key().to_string(),
            r.target.key().to_string(),
            real(r.delta_x),
            r.run.to_string(),
            r.n.to_string(),
            r.guarded.to_string(),
            opt_real(r.mean_ratio),
            opt_real(r.median_ratio),
            real(r.accuracy_base),
            real(r.accuracy_pert),
            real(r.delta_accuracy),
            r.n_minus_p.to_string(),
            r.p_minus_n.to_string(),
            r.count_gain.to_string(),
            r.count_inconsistent.to_string(),
            real(la[0].0),
            real(la[0].1),
            real(la[1].0),
            real(la[1].1),
            real(la[2].0),
            real(la[2].1),
        ])?;
    }
    out.finish()
}

fn write_gains(dir: &Path, gains: &[GainRow]) -> Result<PathBuf> {
    let mut out = CsvOut::create(dir, "model_gain.csv", &GAIN_HEADER)?;
    for g in gains {
        out.row([
            g.target.key().to_string(),
            real(g.delta_x),
            g.run.to_string(),
            g.n.to_string(),
            g.n_minus_p.to_string(),
            g.p_minus_n.to_string(),
            g.count_gain.to_string(),
            g.count_inconsistent.to_string(),
        ])?;
    }
    out.finish()
}

fn write_derived(
    dir: &Path,
    rows: &[SweepRow],
    gains: &[GainRow],
    config: &ExperimentConfig,
) -> Result<Vec<PathBuf>> {
    let summary = summarize(rows);
    let mut written = Vec::new();

    let mut out = CsvOut::create(dir, "sweep_summary.csv", &SUMMARY_HEADER)?;
    for s in &summary {
        let r = s.mean_ratio;
        out.row([
            s.model.key().to_string(),
            s.target.key().to_string(),
            real(s.delta_x),
            s.runs.to_string(),
            s.guarded.to_string(),
            opt_real(r.map(|r| r.mean)),
            opt_real(r.map(|r| r.min)),
            opt_real(r.map(|r| r.max)),
            opt_real(r.map(|r| r.std)),
            opt_real(s.median_ratio.map(|r| r.mean)),
            real(s.accuracy.mean),
            real(s.accuracy.min),
            real(s.accuracy.max),
            real(s.accuracy.std),
            real(s.delta_accuracy.mean),
            real(s.delta_accuracy.min),
            real(s.delta_accuracy.max),
            real(s.count_inconsistent.mean),
            real(s.count_inconsistent.min),
            real(s.count_inconsistent.max),
            real(s.count_gain.mean),
            real(s.label_accuracy[0]),
            real(s.label_accuracy[1]),
            real(s.label_accuracy[2]),
        ])?;
    }
    written.push(out.finish()?);

    let baseline: Vec<&SummaryRow> = summary
        .iter()
        .filter(|s| s.model == ModelKind::Baseline)
        .collect();

    let mut out = CsvOut::create(dir, "fig2.csv", &FIG2_HEADER)?;
    for s in &baseline {
        if let Some(r) = s.mean_ratio {
            out.row([
                s.target.key().to_string(),
                real(s.delta_x),
                real(r.mean),
                real(r.min),
                real(r.max),
            ])?;
        }
    }
    written.push(out.finish()?);

    let mut out = CsvOut::create(dir, "fig3.csv", &FIG3_HEADER)?;
    for s in &baseline {
        out.row([
            s.target.key().to_string(),
            real(s.delta_x),
            real(s.accuracy.mean),
            real(s.accuracy.min),
            real(s.accuracy.max),
            real(s.label_accuracy[0]),
            real(s.label_accuracy[1]),
            real(s.label_accuracy[2]),
        ])?;
    }
    written.push(out.finish()?);

    let mut out = CsvOut::create(dir, "fig4.csv", &FIG4_HEADER)?;
    for s in &baseline {
        out.row([
            s.target.key().to_string(),
            real(s.delta_x),
            real(s.count_inconsistent.mean),
            real(s.count_inconsistent.min),
            real(s.count_inconsistent.max),
            real(s.count_gain.mean),
            real(s.delta_accuracy.mean),
        ])?;
    }
    written.push(out.finish()?);

    if !gains.is_empty() {
        let inconsistent = |model: ModelKind, target: Target, dx: f64| {
            summary
                .iter()
                .find(|s| s.model == model && s.target == target && s.delta_x == dx)
                .map(|s| s.count_inconsistent.mean)
        };
        let mut out = CsvOut::create(dir, "fig5.csv", &FIG5_HEADER)?;
        for g in summarize_gains(gains) {
            let f = inconsistent(ModelKind::Baseline, g.target, g.delta_x);
            let h = inconsistent(ModelKind::Augmented, g.target, g.delta_x);
            let observed = match (f, h) {
                (Some(f), Some(h)) => (h >= f).to_string(),
                _ => String::new(),
            };
            out.row([
                g.target.key().to_string(),
                real(g.delta_x),
                real(g.count_gain.mean),
                real(g.count_gain.min),
                real(g.count_gain.max),
                opt_real(f),
                opt_real(h),
                observed,
            ])?;
        }
        written.push(out.finish()?);
    }

    let mut out = CsvOut::create(dir, "reference_ranges.csv", &RANGES_HEADER)?;
    for r in config.reference_ranges.iter() {
        out.row([r.analyte.key().to_string(), real(r.low), real(r.high)])?;
    }
    written.push(out.finish()?);
    Ok(written)
}

/// Writes every report file into `out_dir` (created if needed) and returns their paths.
pub fn emit_report(report: &AuditReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = vec![write_sweep(out_dir, &report.rows)?];
    if report.has_augmented() || !report.gains.is_empty() {
        written.push(write_gains(out_dir, &report.gains)?);
    }

    let mut out = CsvOut::create(out_dir, "divergence.csv", &DIVERGENCE_HEADER)?;
    for m in &report.memberships {
        out.row([
            m.model.key().to_string(),
            m.target.key().to_string(),
            real(m.delta_x),
            m.patient_id.clone(),
            m.set.to_string(),
        ])?;
    }
    written.push(out.finish()?);

    let mut out = CsvOut::create(out_dir, "failures.csv", &FAILURE_HEADER)?;
    for f in &report.failures {
        out.row([
            f.run.to_string(),
            f.target.key().to_string(),
            f.model.key().to_string(),
            f.message.clone(),
        ])?;
    }
    written.push(out.finish()?);

    let path = out_dir.join("config_used.toml");
    fs::write(&path, report.config.to_toml_string()?).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    written.extend(write_derived(
        out_dir,
        &report.rows,
        &report.gains,
        &report.config,
    )?);
    Ok(written)
}

fn field(rec: &StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("")
}

fn parse<T: std::str::FromStr>(rec: &StringRecord, i: usize, name: &str) -> Result<T> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    field(rec, i).parse().map_err(|_| Error::Row {
        line,
        message: format!("column {name}: cannot parse `{}`", field(rec, i)),
    })
}

fn parse_opt(rec: &StringRecord, i: usize, name: &str) -> Result<Option<f64>> {
    if field(rec, i).is_empty() {
        Ok(None)
    } else {
        parse(rec, i, name).map(Some)
    }
}

fn parse_target(rec: &StringRecord, i: usize) -> Result<Target> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    Target::parse(field(rec, i)).ok_or_else(|| Error::Row {
        line,
        message: format!("unknown target `{}`", field(rec, i)),
    })
}

pub fn read_sweep_csv<R: Read>(source: R) -> Result<Vec<SweepRow>> {
    let mut rdr = ReaderBuilder::new().from_reader(source);
    check_header(rdr.headers().map_err(csv_err)?, &SWEEP_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let model = ModelKind::parse(field(&rec, 0)).ok_or_else(|| Error::Row {
            line,
            message: format!("unknown model `{}`", field(&rec, 0)),
        })?;
        let f = |i: usize| parse::<f64>(&rec, i, SWEEP_HEADER[i]);
        rows.push(SweepRow {
            model,
            target: parse_target(&rec, 1)?,
            delta_x: f(2)?,
            run: parse(&rec, 3, "run")?,
            n: parse(&rec, 4, "n")?,
            guarded: parse(&rec, 5, "guarded")?,
            mean_ratio: parse_opt(&rec, 6, "mean_ratio")?,
            median_ratio: parse_opt(&rec, 7, "median_ratio")?,
            accuracy_base: f(8)?,
            accuracy_pert: f(9)?,
            delta_accuracy: f(10)?,
            n_minus_p: parse(&rec, 11, "n_minus_p")?,
            p_minus_n: parse(&rec, 12, "p_minus_n")?,
            count_gain: parse(&rec, 13, "count_gain")?,
            count_inconsistent: parse(&rec, 14, "count_inconsistent")?,
            label_accuracy: [(f(15)?, f(16)?), (f(17)?, f(18)?), (f(19)?, f(20)?)],
        });
    }
    Ok(rows)
}

pub fn read_gain_csv<R: Read>(source: R) -> Result<Vec<GainRow>> {
    let mut rdr = ReaderBuilder::new().from_reader(source);
    check_header(rdr.headers().map_err(csv_err)?, &GAIN_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(GainRow {
            target: parse_target(&rec, 0)?,
            delta_x: parse(&rec, 1, "delta_x")?,
            run: parse(&rec, 2, "run")?,
            n: parse(&rec, 3, "n")?,
            n_minus_p: parse(&rec, 4, "n_minus_p")?,
            p_minus_n: parse(&rec, 5, "p_minus_n")?,
            count_gain: parse(&rec, 6, "count_gain")?,
            count_inconsistent: parse(&rec, 7, "count_inconsistent")?,
        });
    }
    Ok(rows)
}

/// Regenerates the summary, figure and range files of an existing report
/// directory from its `sweep.csv`, `model_gain.csv` and `config_used.toml`.
pub fn rebuild_report_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let open = |name: &str| -> Result<Option<BufReader<File>>> {
        let path = dir.join(name);
        match File::open(&path) {
            Ok(f) => Ok(Some(BufReader::new(f))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&path, e)),
        }
    };
    let sweep = open("sweep.csv")?
        .ok_or_else(|| Error::io(dir.join("sweep.csv"), std::io::ErrorKind::NotFound.into()))?;
    let rows = read_sweep_csv(sweep)?;
    let gains = match open("model_gain.csv")? {
        Some(r) => read_gain_csv(r)?,
        None => Vec::new(),
    };
    let config = match dir.join("config_used.toml") {
        p if p.exists() => ExperimentConfig::from_path(&p)?,
        _ => ExperimentConfig::default(),
    };
    write_derived(dir, &rows, &gains, &config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, dx: f64, acc: f64, ratio: Option<f64>) -> SweepRow {
        SweepRow {
            model: ModelKind::Baseline,
            target: Target::Tsh,
            delta_x: dx,
            run,
            n: 3,
            guarded: 0,
            mean_ratio: ratio,
            median_ratio: ratio,
            accuracy_base: 2.0 / 3.0,
            accuracy_pert: acc,
            delta_accuracy: acc - 2.0 / 3.0,
            n_minus_p: 0,
            p_minus_n: 0,
            count_gain: 0,
            count_inconsistent: 0,
            label_accuracy: [(1.0 / 3.0, 1.0 / 3.0); 3],
        }
    }

    #[test]
    fn stat_basic() {
        let s = Stat::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max, s.std), (2.0, 1.0, 3.0, 1.0));
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn summary_groups_and_skips_undefined_ratios() {
        let rows = vec![
            row(1, 0.0, 2.0 / 3.0, None),
            row(2, 0.0, 1.0 / 3.0, None),
            row(1, 0.05, 1.0, Some(1.5)),
            row(2, 0.05, 0.0, Some(0.5)),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].delta_x, 0.0);
        assert!(s[0].mean_ratio.is_none());
        assert_eq!(s[1].mean_ratio.unwrap().mean, 1.0);
        assert_eq!(s[1].runs, 2);
    }

    #[test]
    fn sweep_csv_round_trip_is_quantized() {
        let rows = vec![row(1, 0.05, 2.0 / 3.0, Some(1.0 / 7.0))];
        let dir = tempfile::tempdir().unwrap();
        write_sweep(dir.path(), &rows).unwrap();
        let back = read_sweep_csv(File::open(dir.path().join("sweep.csv")).unwrap()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].accuracy_pert, q(2.0 / 3.0));
        assert_eq!(summarize(&rows), summarize(&back));
    }

    #[test]
    fn bad_header_is_rejected() {
        let err = read_sweep_csv("model,target\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing columns"), "{err}");
    }
}

//! Command-line front end. `main` only forwards to [`run`].

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{
    generate_synthetic, split, write_dataset_csv, write_exclusions_csv, write_visits_csv,
};
use crate::domain::Target;
use crate::error::{Error, Result};
use crate::harness::{
    emit_report, load_data, rebuild_report_files, run_augmented, run_seeds, run_sweep,
    ExperimentConfig, ModelKind,
};
use crate::lstm::{save, train, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "lab-imprecision",
    version,
    about = "Lab-imprecision propagation audit for LSTM predictors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic visit CSV.
    Generate(Common),
    /// Preprocess visits into the 7-slot dataset and exclusion log.
    Preprocess(Common),
    /// Train one model per target (run-1 seeds) and save artifacts.
    Train(Common),
    /// Δx sweep with the baseline model.
    Audit(Common),
    /// Sweep plus augmented retraining and Count_gain(f, h).
    Augment(Common),
    /// Rebuild summaries and figure files from an existing report directory.
    Report(Common),
    /// Generate, preprocess and run the augmented experiment end to end.
    RunAll(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Tsh,
    Trab,
    Both,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides master_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Visit CSV to ingest instead of generating a cohort.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

impl Common {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        match self.target {
            Some(TargetArg::Tsh) => cfg.targets = vec![Target::Tsh],
            Some(TargetArg::Trab) => cfg.targets = vec![Target::Trab],
            Some(TargetArg::Both) => cfg.targets = Target::ALL.to_vec(),
            None => {}
        }
        if let Some(p) = &self.input {
            cfg.visits_csv = Some(p.clone());
        }
        cfg.check()?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_data(
    cfg: &ExperimentConfig,
    out: &Path,
    visits: bool,
) -> Result<crate::data::Preprocessed> {
    mkdir(out)?;
    let (cohort, pre) = load_data(cfg)?;
    if visits {
        write_visits_csv(create(&out.join("visits.csv"))?, &cohort)?;
    }
    write_dataset_csv(create(&out.join("dataset.csv"))?, &pre.dataset)?;
    write_exclusions_csv(create(&out.join("exclusions.csv"))?, &pre.excluded)?;
    Ok(pre)
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Generate(c) => {
            let cfg = c.resolve()?;
            mkdir(&c.out)?;
            let cohort = generate_synthetic(&cfg.generator)?;
            write_visits_csv(create(&c.out.join("visits.csv"))?, &cohort)
        }
        Command::Preprocess(c) => {
            let pre = write_data(&c.resolve()?, &c.out, false)?;
            eprintln!(
                "retained {} patients, excluded {}",
                pre.dataset.len(),
                pre.excluded.len()
            );
            Ok(())
        }
        Command::Train(c) => {
            let cfg = c.resolve()?;
            mkdir(&c.out)?;
            let (_, pre) = load_data(&cfg)?;
            let seeds = run_seeds(&cfg, 1);
            let (train_set, _) = split(&pre.dataset, cfg.train_n, seeds.split)?;
            for &t in &cfg.targets {
                let tc = TrainConfig {
                    seed: seeds.train(t, ModelKind::Baseline),
                    ..cfg.train.clone()
                };
                let model = train(&train_set, &cfg.model.for_target(t), &tc)?;
                save(
                    &model,
                    create(&c.out.join(format!("model_{}.lstm", t.key())))?,
                )?;
            }
            Ok(())
        }
        Command::Audit(c) => emit_report(&run_sweep(&c.resolve()?)?, &c.out).map(drop),
        Command::Augment(c) => emit_report(&run_augmented(&c.resolve()?)?, &c.out).map(drop),
        Command::Report(c) => rebuild_report_files(&c.out).map(drop),
        Command::RunAll(c) => {
            let cfg = c.resolve()?;
            write_data(&cfg, &c.out, cfg.visits_csv.is_none())?;
            emit_report(&run_augmented(&cfg)?, &c.out).map(drop)
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

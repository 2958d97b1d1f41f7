//! Retrain on originals plus a perturbed copy (Δt = 0.05) and compare the
//! augmented model h against f on the reduced profile.
//!
//! cargo run --release --example augmented_retraining -- [out_dir]

use std::path::PathBuf;

use lab_imprecision::harness::{
    emit_report, run_augmented, summarize, summarize_gains, ExperimentConfig, ModelKind,
};

fn main() -> lab_imprecision::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lab_augmented"));
    let report = run_augmented(&ExperimentConfig::ci_profile())?;
    emit_report(&report, &out)?;

    let summary = summarize(&report.rows);
    let inconsistent = |m: ModelKind, g: &lab_imprecision::harness::GainSummary| {
        summary
            .iter()
            .find(|s| s.model == m && s.target == g.target && s.delta_x == g.delta_x)
            .map(|s| s.count_inconsistent.mean)
            .unwrap_or(f64::NAN)
    };
    println!("target  Δx     gain(f,h)  inconsistent f  inconsistent h");
    for g in summarize_gains(&report.gains) {
        println!(
            "{:<6}  {:<5}  {:<9.1}  {:<14.1}  {:.1}",
            g.target.key(),
            g.delta_x,
            g.count_gain.mean,
            inconsistent(ModelKind::Baseline, &g),
            inconsistent(ModelKind::Augmented, &g)
        );
    }
    println!("report in {}", out.display());
    Ok(())
}

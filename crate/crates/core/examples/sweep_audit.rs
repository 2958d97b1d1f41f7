//! Δx sweep on the reduced profile (200 patients, 2 runs, 20 epochs), with
//! the report written to a directory.
//!
//! cargo run --release --example sweep_audit -- [out_dir]

use std::path::PathBuf;

use lab_imprecision::harness::{emit_report, run_sweep, summarize, ExperimentConfig};

fn main() -> lab_imprecision::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lab_sweep"));
    let report = run_sweep(&ExperimentConfig::ci_profile())?;
    emit_report(&report, &out)?;

    println!("target  Δx     ratio    accuracy  inconsistent");
    for s in summarize(&report.rows) {
        let ratio = s
            .mean_ratio
            .map(|r| format!("{:.3}", r.mean))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<6}  {:<5}  {ratio:<7}  {:.4}    {:.1}",
            s.target.key(),
            s.delta_x,
            s.accuracy.mean,
            s.count_inconsistent.mean
        );
    }
    println!("report in {}", out.display());
    Ok(())
}

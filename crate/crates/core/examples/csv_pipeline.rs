//! Round-trip a small cohort through the visit CSV format, then preprocess
//! the ingested copy and write the dataset and exclusion CSVs.
//!
//! cargo run --release --example csv_pipeline -- [out_dir]

use std::fs::File;
use std::path::PathBuf;

use lab_imprecision::data::{
    generate_synthetic, ingest_csv, preprocess, write_dataset_csv, write_exclusions_csv,
    write_visits_csv, GeneratorConfig, PreprocessConfig,
};
use lab_imprecision::domain::Provenance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lab_csv_pipeline"));
    std::fs::create_dir_all(&out)?;

    let cohort = generate_synthetic(&GeneratorConfig {
        n_patients: 40,
        seed: 3,
        ..Default::default()
    })?;
    let visits = out.join("visits.csv");
    write_visits_csv(File::create(&visits)?, &cohort)?;

    let ingested = ingest_csv(File::open(&visits)?)?;
    println!(
        "ingested {} visits for {} patients",
        ingested.visits.len(),
        ingested.statics.len()
    );

    let pre = preprocess(
        &ingested,
        &PreprocessConfig::default(),
        Provenance::Ingested,
        None,
    )?;
    write_dataset_csv(File::create(out.join("dataset.csv"))?, &pre.dataset)?;
    write_exclusions_csv(File::create(out.join("exclusions.csv"))?, &pre.excluded)?;
    println!(
        "retained {}, excluded {}; files in {}",
        pre.dataset.len(),
        pre.excluded.len(),
        out.display()
    );

    let first = &pre.dataset.records[0];
    println!("{}: slot days {:?}", first.id(), first.series.visit_days);
    Ok(())
}

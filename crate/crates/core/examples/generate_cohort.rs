//! Generate the default synthetic cohort, preprocess it, and print the
//! retained/excluded counts and the 2-year label mix.
//!
//! cargo run --release --example generate_cohort

use std::collections::BTreeMap;

use lab_imprecision::data::{generate_synthetic, preprocess, GeneratorConfig, PreprocessConfig};
use lab_imprecision::domain::{label_of, Provenance, Target};

fn main() -> lab_imprecision::Result<()> {
    let gen = GeneratorConfig::default();
    let cohort = generate_synthetic(&gen)?;
    let pre_cfg = PreprocessConfig::default();
    let pre = preprocess(&cohort, &pre_cfg, Provenance::Synthetic, Some(gen.seed))?;

    println!("visits generated: {}", cohort.visits.len());
    println!("patients retained: {}", pre.dataset.len());
    let mut rules: BTreeMap<String, usize> = BTreeMap::new();
    for e in &pre.excluded {
        *rules.entry(e.rule.to_string()).or_default() += 1;
    }
    for (rule, n) in rules {
        println!("  excluded ({rule}): {n}");
    }

    for t in Target::ALL {
        let range = pre_cfg.reference_ranges.get(t.analyte());
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &pre.dataset.records {
            *counts
                .entry(label_of(r.target(t), &range)?.name())
                .or_default() += 1;
        }
        println!(
            "{} at 2 years, range [{}, {}]: {counts:?}",
            t.key(),
            range.low,
            range.high
        );
    }
    Ok(())
}

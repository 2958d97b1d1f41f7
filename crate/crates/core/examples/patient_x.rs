//! A ±1% shift of the inputs can move a TSH prediction across the lower
//! reference bound. The two predictions below are Patient X's.
//!
//! cargo run --example patient_x

use lab_imprecision::domain::{
    label_of, Analyte, FeatureVector, LabSeries, ReferenceRange, Sex, StaticAttributes,
};
use lab_imprecision::metrics::delta_y;
use lab_imprecision::perturb::{perturb_series, PerturbationSpec, SignPolicy};

fn main() -> lab_imprecision::Result<()> {
    let tsh = ReferenceRange::tsh_default();
    let (before, after) = (0.352764, 0.320893);
    println!("prediction {before} -> {:?}", label_of(before, &tsh)?);
    println!("prediction {after} -> {:?}", label_of(after, &tsh)?);
    println!("Δy = {:.4}", delta_y(before, after).unwrap());

    // early history of a 34-year-old woman with a low first TSH
    let visits = [
        (0.01, 9.8, 38.0, 12.0),
        (0.01, 7.9, 31.0, 10.5),
        (0.02, 5.6, 22.0, 8.1),
        (0.05, 4.7, 17.5, 6.0),
        (0.09, 4.3, 16.0, 5.2),
        (0.21, 4.1, 15.2, 4.1),
        (0.30, 4.0, 14.9, 3.6),
    ];
    let series = LabSeries {
        patient_id: "X".into(),
        statics: StaticAttributes {
            sex: Sex::Female,
            age_years: 34.0,
        },
        visits: visits
            .iter()
            .map(|&(tsh, ft3, ft4, trab)| FeatureVector::new(ft3, ft4, tsh, trab))
            .collect(),
        visit_days: vec![0, 30, 60, 90, 120, 150, 180],
    };
    let spec = PerturbationSpec {
        delta_x: 0.01,
        sign_policy: SignPolicy::RandomPerValue,
        ..PerturbationSpec::default()
    };
    let shifted = perturb_series(&series, &spec)?;
    println!("slot  tsh        tsh'");
    for (i, (a, b)) in series.visits.iter().zip(&shifted.visits).enumerate() {
        println!(
            "{i:>4}  {:<9}  {:.6}",
            a.get(Analyte::Tsh),
            b.get(Analyte::Tsh)
        );
    }
    Ok(())
}

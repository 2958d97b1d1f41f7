//! Confusion sets, accuracy and divergence counts on a five-patient toy cohort.
//!
//! cargo run --example metrics_walkthrough

use lab_imprecision::domain::LabelClass::{self, High, Low, Normal};
use lab_imprecision::metrics::{
    accuracy, confusion, correct_set, divergence_of_correct, multiclass_accuracy,
};

fn labelled(v: &[LabelClass]) -> Vec<(String, LabelClass)> {
    v.iter()
        .enumerate()
        .map(|(i, l)| (format!("p{}", i + 1), *l))
        .collect()
}

fn main() -> lab_imprecision::Result<()> {
    let truth = labelled(&[Low, Normal, Normal, High, Low]);
    let base = labelled(&[Low, Normal, Low, High, Normal]);
    let pert = labelled(&[Normal, Normal, Normal, High, Normal]);

    for l in LabelClass::ALL {
        let c = confusion(&base, &truth, l)?;
        println!(
            "{:<6} tp={:?} tn={:?} fp={:?} fn={:?}  acc={}",
            l.name(),
            c.tp,
            c.tn,
            c.fp,
            c.fn_,
            accuracy(&c, 5)?
        );
    }
    println!(
        "multi-class accuracy: base {} perturbed {}",
        multiclass_accuracy(&base, &truth)?,
        multiclass_accuracy(&pert, &truth)?
    );

    let d = divergence_of_correct(
        &correct_set(&base, &truth)?,
        &correct_set(&pert, &truth)?,
        5,
    )?;
    println!("N−P {:?}  P−N {:?}", d.n_minus_p, d.p_minus_n);
    println!(
        "Count_gain {}  Count_inconsistent {}  ΔAccuracy {}",
        d.count_gain, d.count_inconsistent, d.delta_accuracy
    );
    Ok(())
}

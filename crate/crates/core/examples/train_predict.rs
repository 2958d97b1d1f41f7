//! Train a small TSH regressor, save it, reload it and predict.
//!
//! cargo run --release --example train_predict

use lab_imprecision::data::{
    generate_synthetic, preprocess, split, GeneratorConfig, PreprocessConfig,
};
use lab_imprecision::domain::{Provenance, Target};
use lab_imprecision::lstm::{load, predict, save, train_with_history, ModelConfig, TrainConfig};

fn main() -> lab_imprecision::Result<()> {
    let cohort = generate_synthetic(&GeneratorConfig {
        n_patients: 300,
        ..Default::default()
    })?;
    let data = preprocess(
        &cohort,
        &PreprocessConfig::default(),
        Provenance::Synthetic,
        None,
    )?
    .dataset;
    let (train_set, test) = split(&data, 240, 11)?;

    let model_cfg = ModelConfig {
        hidden_units: 32,
        ..ModelConfig::default()
    }
    .for_target(Target::Tsh);
    let train_cfg = TrainConfig {
        epochs: 30,
        seed: 5,
        ..TrainConfig::default()
    };
    let (model, losses) = train_with_history(&train_set, &model_cfg, &train_cfg)?;
    for (epoch, loss) in losses.iter().enumerate().step_by(5) {
        println!("epoch {:>3}  loss {loss:.4}", epoch + 1);
    }

    let mut bytes = Vec::new();
    save(&model, &mut bytes)?;
    let reloaded = load(&bytes)?;
    assert_eq!(reloaded, model);
    println!(
        "artifact: {} bytes, {} parameters",
        bytes.len(),
        model.params.data.len()
    );

    for r in test.records.iter().take(5) {
        println!(
            "{}  predicted {:.3}  actual {:.3}",
            r.id(),
            predict(&reloaded, &r.series)?,
            r.target_tsh
        );
    }
    Ok(())
}

//! Compare BPTT gradients with central finite differences on a 1-layer,
//! 4-unit model over a 7-step batch.
//!
//! cargo run --release --example gradient_check

use lab_imprecision::domain::Target;
use lab_imprecision::lstm::{init_params, loss_and_grad, Mode, ModelConfig};
use ndarray::Array2;
use rand::Rng;

fn main() -> lab_imprecision::Result<()> {
    let cfg = ModelConfig {
        hidden_layers: 1,
        hidden_units: 4,
        init_stddev: 0.5,
        ..ModelConfig::default()
    }
    .for_target(Target::Tsh);
    let mut params = init_params(&cfg, 1);
    let mut rng = lab_imprecision::seed::rng(2);
    let steps: Vec<Array2<f64>> = (0..7)
        .map(|_| Array2::from_shape_fn((3, 6), |_| rng.random_range(-1.0..1.0)))
        .collect();
    let targets = [0.3, -0.5, 1.1];

    let (_, grad) = loss_and_grad(&params, &steps, &targets, Mode::Eval)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.data.len() {
        let orig = params.data[i];
        params.data[i] = orig + h;
        let (lp, _) = loss_and_grad(&params, &steps, &targets, Mode::Eval)?;
        params.data[i] = orig - h;
        let (lm, _) = loss_and_grad(&params, &steps, &targets, Mode::Eval)?;
        params.data[i] = orig;
        let numeric = (lp - lm) / (2.0 * h);
        let a = grad.data[i];
        let scale = a.abs().max(numeric.abs());
        if scale > 1e-8 {
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    println!(
        "{} parameters, worst relative error {worst:.2e}",
        params.data.len()
    );
    Ok(())
}

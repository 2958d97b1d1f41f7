use lab_imprecision::data::{generate_synthetic, preprocess, GeneratorConfig, PreprocessConfig};
use lab_imprecision::domain::{Provenance, Target};
use lab_imprecision::lstm::{
    adam_step, init_params, loss_and_grad, train_with_history, AdamState, LstmParams, Mode,
    ModelConfig, TrainConfig,
};
use lab_imprecision::seed;
use ndarray::Array2;
use rand::Rng;

/// Standard deviation of N(0, σ²) truncated to ±kσ, by Simpson quadrature.
fn truncated_std(sigma: f64, k: f64) -> f64 {
    let n = 20_000;
    let (a, b) = (-k * sigma, k * sigma);
    let h = (b - a) / n as f64;
    let pdf = |x: f64| (-0.5 * (x / sigma).powi(2)).exp();
    let (mut mass, mut second) = (0.0, 0.0);
    for i in 0..=n {
        let x = a + i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        mass += w * pdf(x);
        second += w * x * x * pdf(x);
    }
    (second / mass).sqrt()
}

#[test]
fn initial_weights_follow_the_truncated_normal() {
    let cfg = ModelConfig::default().for_target(Target::Tsh);
    let p = init_params(&cfg, 17);
    let layout = &p.layout;
    let mut weights: Vec<f64> = p.matrix(layout.w_in).iter().copied().collect();
    for l in &layout.layers {
        weights.extend(p.matrix(l.w_x).iter());
        weights.extend(p.matrix(l.w_h).iter());
    }
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let std = (weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
    let expected = truncated_std(0.1, 2.0);
    assert!((expected - 0.088).abs() < 5e-4, "{expected}");
    assert!((std - expected).abs() < 2e-3, "{std} vs {expected}");
    assert!(mean.abs() < 2e-3);
    assert!(weights.iter().all(|w| w.abs() <= 0.2));

    // forget-gate bias 1, the rest 0
    let h = cfg.hidden_units;
    for l in &layout.layers {
        let b = p.vector(l.bias);
        assert!(b
            .iter()
            .enumerate()
            .all(|(i, v)| *v == if (h..2 * h).contains(&i) { 1.0 } else { 0.0 }));
    }
    assert_eq!(init_params(&cfg, 17), p);
    assert_ne!(init_params(&cfg, 18), p);
}

#[test]
fn two_layer_gradients_match_finite_differences() {
    let cfg = ModelConfig {
        hidden_layers: 2,
        hidden_units: 3,
        init_stddev: 0.5,
        ..ModelConfig::default()
    }
    .for_target(Target::Trab);
    let mut params = init_params(&cfg, 8);
    let mut rng = seed::rng(4);
    let steps: Vec<Array2<f64>> = (0..7)
        .map(|_| Array2::from_shape_fn((2, 6), |_| rng.random_range(-1.0..1.0)))
        .collect();
    let targets = [1.0, -0.7];
    let mode = Mode::Train {
        dropout_rate: 0.3,
        seed: 2,
    };
    let (_, grad) = loss_and_grad(&params, &steps, &targets, mode).unwrap();
    let h = 1e-5;
    for i in 0..params.data.len() {
        let orig = params.data[i];
        params.data[i] = orig + h;
        let lp = loss_and_grad(&params, &steps, &targets, mode).unwrap().0;
        params.data[i] = orig - h;
        let lm = loss_and_grad(&params, &steps, &targets, mode).unwrap().0;
        params.data[i] = orig;
        let num = (lp - lm) / (2.0 * h);
        let scale = num.abs().max(grad.data[i].abs());
        assert!(
            scale < 1e-8 || (num - grad.data[i]).abs() / scale < 1e-4,
            "param {i}: {} vs {num}",
            grad.data[i]
        );
    }
}

#[test]
fn training_reduces_loss_on_fifty_patients() {
    let cohort = generate_synthetic(&GeneratorConfig {
        n_patients: 50,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let data = preprocess(
        &cohort,
        &PreprocessConfig::default(),
        Provenance::Synthetic,
        None,
    )
    .unwrap()
    .dataset;
    let model = ModelConfig {
        hidden_units: 16,
        ..ModelConfig::default()
    }
    .for_target(Target::Tsh);
    let train = TrainConfig {
        epochs: 15,
        batch_size: 10,
        seed: 3,
        ..TrainConfig::default()
    };
    let (_, losses) = train_with_history(&data, &model, &train).unwrap();
    assert_eq!(losses.len(), 15);
    assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
    let (_, again) = train_with_history(&data, &model, &train).unwrap();
    assert_eq!(again, losses);
}

#[test]
fn adam_with_zero_gradient() {
    let cfg = ModelConfig {
        hidden_layers: 1,
        hidden_units: 2,
        ..Default::default()
    }
    .for_target(Target::Tsh);
    let tc = TrainConfig::default();
    let start = init_params(&cfg, 1);
    let zero = LstmParams::zeros(start.layout.clone());

    let mut p = start.clone();
    let mut state = AdamState::new(p.data.len());
    adam_step(&mut p, &zero, &mut state, 1, &tc);
    assert_eq!(p, start);

    // with momentum from an earlier step, a zero gradient still moves the parameters
    let mut ones = zero.clone();
    ones.data.iter_mut().for_each(|g| *g = 1.0);
    let mut p = start.clone();
    let mut state = AdamState::new(p.data.len());
    adam_step(&mut p, &ones, &mut state, 1, &tc);
    let after_one = p.clone();
    for (a, b) in after_one.data.iter().zip(&start.data) {
        assert!((b - a - tc.learning_rate).abs() < 1e-9);
    }
    adam_step(&mut p, &zero, &mut state, 2, &tc);
    assert!(p.data.iter().zip(&after_one.data).all(|(a, b)| a < b));
}

use super::params::LstmParams;
use super::TrainConfig;

/// First and second moment accumulators, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update at step `t` (1-based), in place.
pub fn adam_step(
    params: &mut LstmParams,
    grads: &LstmParams,
    state: &mut AdamState,
    t: u64,
    config: &TrainConfig,
) {
    assert!(t >= 1, "adam step index starts at 1");
    assert_eq!(params.data.len(), grads.data.len());
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let t = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let eps = config.adam_epsilon;
    for (((p, g), m), v) in params
        .data
        .iter_mut()
        .zip(&grads.data)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::params::LstmParams;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Inverted dropout with masks drawn from `seed`.
    Train {
        dropout_rate: f64,
        seed: u64,
    },
    Eval,
}

struct LayerCache {
    /// Layer input at each step (`B × H`).
    inputs: Vec<Array2<f64>>,
    /// `h_{t-1}` for t = 0..T, so `hidden[0]` is the zero initial state.
    hidden: Vec<Array2<f64>>,
    /// Same indexing as `hidden`.
    cells: Vec<Array2<f64>>,
    /// Activated gates per step (`B × 4H`): input, forget, output, candidate.
    gates: Vec<Array2<f64>>,
    masks: Option<Vec<Array2<f64>>>,
}

/// Output of a forward pass in normalized target units, plus the caches
/// needed for backpropagation.
pub struct Forward {
    pub output: Array1<f64>,
    steps: Vec<Array2<f64>>,
    layers: Vec<LayerCache>,
    top: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_finite(a: &Array2<f64>, layer: usize, step: usize) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric {
            step: format!("layer {layer} step {step}"),
            message: "non-finite hidden state".into(),
        })
    }
}

/// Runs the network over a batch. `steps[t]` is the `B × input_dim` input at step `t`.
pub fn forward(params: &LstmParams, steps: &[Array2<f64>], mode: Mode) -> Result<Forward> {
    let lay = &params.layout;
    let h = lay.hidden;
    let t_len = steps.len();
    if t_len == 0 {
        return Err(Error::domain("empty input sequence"));
    }
    let batch = steps[0].nrows();
    if steps
        .iter()
        .any(|s| s.nrows() != batch || s.ncols() != lay.input_dim)
    {
        return Err(Error::domain(format!(
            "input steps must all be {batch} × {}",
            lay.input_dim
        )));
    }

    let w_in = params.matrix(lay.w_in);
    let b_in = params.vector(lay.b_in);
    let mut seq: Vec<Array2<f64>> = steps
        .iter()
        .map(|x| {
            let mut z = x.dot(&w_in.t());
            z += &b_in;
            z
        })
        .collect();

    let (keep, mut rng) = match mode {
        Mode::Train { dropout_rate, seed } if dropout_rate > 0.0 => {
            (1.0 - dropout_rate, Some(seed::rng(seed)))
        }
        _ => (1.0, None),
    };

    let mut layers = Vec::with_capacity(lay.n_layers());
    for (li, spans) in lay.layers.iter().enumerate() {
        let w_x = params.matrix(spans.w_x);
        let w_h = params.matrix(spans.w_h);
        let bias = params.vector(spans.bias);
        let mut hidden = vec![Array2::<f64>::zeros((batch, h))];
        let mut cells = vec![Array2::<f64>::zeros((batch, h))];
        let mut gates = Vec::with_capacity(t_len);
        let mut masks = rng.as_ref().map(|_| Vec::with_capacity(t_len));
        let mut outs = Vec::with_capacity(t_len);

        for (t, input) in seq.iter().enumerate() {
            let mut a = input.dot(&w_x.t());
            general_mat_mul(1.0, &hidden[t], &w_h.t(), 1.0, &mut a);
            a += &bias;
            let mut c = Array2::<f64>::zeros((batch, h));
            let mut hn = Array2::<f64>::zeros((batch, h));
            {
                let a_s = a.as_slice_mut().expect("standard layout");
                let c_prev = cells[t].as_slice().expect("standard layout");
                let c_s = c.as_slice_mut().expect("standard layout");
                let h_s = hn.as_slice_mut().expect("standard layout");
                for r in 0..batch {
                    let g = &mut a_s[r * 4 * h..(r + 1) * 4 * h];
                    for v in &mut g[..3 * h] {
                        *v = sigmoid(*v);
                    }
                    for v in &mut g[3 * h..] {
                        *v = v.tanh();
                    }
                    for j in 0..h {
                        let k = r * h + j;
                        let cv = g[h + j] * c_prev[k] + g[j] * g[3 * h + j];
                        c_s[k] = cv;
                        h_s[k] = g[2 * h + j] * cv.tanh();
                    }
                }
            }
            check_finite(&hn, li, t)?;
            let out = match (&mut rng, &mut masks) {
                (Some(rng), Some(masks)) => {
                    let mask = Array2::from_shape_fn((batch, h), |_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    let out = &hn * &mask;
                    masks.push(mask);
                    out
                }
                _ => hn.clone(),
            };
            outs.push(out);
            gates.push(a);
            cells.push(c);
            hidden.push(hn);
        }
        let inputs = std::mem::replace(&mut seq, outs);
        layers.push(LayerCache {
            inputs,
            hidden,
            cells,
            gates,
            masks,
        });
    }

    let top = seq.pop().expect("non-empty sequence");
    let w_out = params.matrix(lay.w_out);
    let b_out = params.data[lay.b_out.offset];
    let output = top.dot(&w_out.row(0)) + b_out;
    if output.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            step: "output head".into(),
            message: "non-finite prediction".into(),
        });
    }
    Ok(Forward {
        output,
        steps: steps.to_vec(),
        layers,
        top,
    })
}

/// Mean squared error over the batch and its full BPTT gradient.
///
/// `targets` are in normalized units. The dropout masks drawn in the forward
/// pass are reused for the backward pass.
pub fn loss_and_grad(
    params: &LstmParams,
    steps: &[Array2<f64>],
    targets: &[f64],
    mode: Mode,
) -> Result<(f64, LstmParams)> {
    let fwd = forward(params, steps, mode)?;
    if targets.len() != fwd.output.len() {
        return Err(Error::domain(format!(
            "{} targets for a batch of {}",
            targets.len(),
            fwd.output.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    let lay = &params.layout;
    let h = lay.hidden;
    let batch = targets.len();
    let n = batch as f64;
    let diff = &fwd.output - &Array1::from(targets.to_vec());
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    if !loss.is_finite() {
        return Err(Error::Numeric {
            step: "loss".into(),
            message: "non-finite loss".into(),
        });
    }
    let dy = diff * (2.0 / n);

    let mut grads = LstmParams::zeros(lay.clone());
    grads.vector_mut(lay.w_out).assign(&fwd.top.t().dot(&dy));
    grads.data[lay.b_out.offset] = dy.sum();

    let t_len = fwd.steps.len();
    let w_out = params.matrix(lay.w_out);
    let mut d_seq: Vec<Array2<f64>> = vec![Array2::zeros((batch, h)); t_len];
    d_seq[t_len - 1] = &dy.view().insert_axis(Axis(1)) * &w_out.row(0);

    for (li, spans) in lay.layers.iter().enumerate().rev() {
        let cache = &fwd.layers[li];
        let w_x = params.matrix(spans.w_x);
        let w_h = params.matrix(spans.w_h);
        let mut dh_next = Array2::<f64>::zeros((batch, h));
        let mut dc_next = Array2::<f64>::zeros((batch, h));
        let mut da = Array2::<f64>::zeros((batch, 4 * h));
        let mut d_in = Vec::with_capacity(t_len);

        for t in (0..t_len).rev() {
            let mut dh = d_seq[t].clone();
            if let Some(masks) = &cache.masks {
                dh *= &masks[t];
            }
            dh += &dh_next;
            {
                let g = cache.gates[t].as_slice().expect("standard layout");
                let c = cache.cells[t + 1].as_slice().expect("standard layout");
                let cp = cache.cells[t].as_slice().expect("standard layout");
                let dh = dh.as_slice().expect("standard layout");
                let dcn = dc_next.as_slice_mut().expect("standard layout");
                let da_s = da.as_slice_mut().expect("standard layout");
                for r in 0..batch {
                    let g = &g[r * 4 * h..(r + 1) * 4 * h];
                    let d = &mut da_s[r * 4 * h..(r + 1) * 4 * h];
                    for j in 0..h {
                        let k = r * h + j;
                        let (i, f, o, cand) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                        let tc = c[k].tanh();
                        let d_o = dh[k] * tc;
                        let dc = dh[k] * o * (1.0 - tc * tc) + dcn[k];
                        d[j] = dc * cand * i * (1.0 - i);
                        d[h + j] = dc * cp[k] * f * (1.0 - f);
                        d[2 * h + j] = d_o * o * (1.0 - o);
                        d[3 * h + j] = dc * i * (1.0 - cand * cand);
                        dcn[k] = dc * f;
                    }
                }
            }
            general_mat_mul(
                1.0,
                &da.t(),
                &cache.inputs[t],
                1.0,
                &mut grads.matrix_mut(spans.w_x),
            );
            general_mat_mul(
                1.0,
                &da.t(),
                &cache.hidden[t],
                1.0,
                &mut grads.matrix_mut(spans.w_h),
            );
            grads
                .vector_mut(spans.bias)
                .scaled_add(1.0, &da.sum_axis(Axis(0)));
            d_in.push(da.dot(&w_x));
            dh_next = da.dot(&w_h);
        }
        d_in.reverse();
        d_seq = d_in;
    }

    for (d, x) in d_seq.iter().zip(&fwd.steps) {
        general_mat_mul(1.0, &d.t(), x, 1.0, &mut grads.matrix_mut(lay.w_in));
        grads
            .vector_mut(lay.b_in)
            .scaled_add(1.0, &d.sum_axis(Axis(0)));
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::lstm::params::ParamLayout;

    fn random_params(layout: ParamLayout, scale: f64, seed: u64) -> LstmParams {
        let mut rng = seed::rng(seed);
        let mut p = LstmParams::zeros(layout);
        for v in &mut p.data {
            *v = scale * rng.sample::<f64, _>(StandardNormal);
        }
        p
    }

    fn random_steps(batch: usize, dim: usize, seed: u64) -> Vec<Array2<f64>> {
        let mut rng = seed::rng(seed);
        (0..7)
            .map(|_| Array2::from_shape_fn((batch, dim), |_| rng.sample(StandardNormal)))
            .collect()
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let layout = ParamLayout::new(6, 5, 2);
        let mut p = LstmParams::zeros(layout);
        let off = p.layout.b_out.offset;
        p.data[off] = 0.75;
        let out = forward(&p, &random_steps(4, 6, 1), Mode::Eval).unwrap();
        assert!(out.output.iter().all(|v| *v == 0.75));
    }

    #[test]
    fn zero_dropout_train_equals_eval() {
        let p = random_params(ParamLayout::new(6, 8, 2), 0.3, 2);
        let x = random_steps(5, 6, 3);
        let a = forward(&p, &x, Mode::Eval).unwrap().output;
        let b = forward(
            &p,
            &x,
            Mode::Train {
                dropout_rate: 0.0,
                seed: 9,
            },
        )
        .unwrap()
        .output;
        assert_eq!(a, b);
        let c = forward(
            &p,
            &x,
            Mode::Train {
                dropout_rate: 0.5,
                seed: 9,
            },
        )
        .unwrap()
        .output;
        assert_ne!(a, c);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let p = random_params(ParamLayout::new(6, 4, 1), 0.3, 2);
        assert!(forward(&p, &random_steps(2, 5, 1), Mode::Eval).is_err());
    }

    #[test]
    fn non_finite_input_is_numeric_error() {
        let p = random_params(ParamLayout::new(6, 4, 1), 0.3, 2);
        let mut x = random_steps(2, 6, 1);
        x[3][[0, 0]] = f64::NAN;
        match forward(&p, &x, Mode::Eval) {
            Err(Error::Numeric { step, .. }) => assert_eq!(step, "layer 0 step 3"),
            other => panic!("{:?}", other.map(|f| f.output)),
        }
    }

    #[test]
    fn repeated_batch_leaves_loss_and_grad_unchanged() {
        let p = random_params(ParamLayout::new(6, 4, 2), 0.4, 4);
        let x = random_steps(3, 6, 5);
        let y = [0.3, -1.0, 0.8];
        let (l1, g1) = loss_and_grad(&p, &x, &y, Mode::Eval).unwrap();
        let doubled: Vec<Array2<f64>> = x
            .iter()
            .map(|s| ndarray::concatenate(Axis(0), &[s.view(), s.view()]).unwrap())
            .collect();
        let (l2, g2) =
            loss_and_grad(&p, &doubled, &[0.3, -1.0, 0.8, 0.3, -1.0, 0.8], Mode::Eval).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.data.iter().zip(&g2.data) {
            assert!((a - b).abs() < 1e-13 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn perfect_prediction_has_zero_head_gradient() {
        let p = random_params(ParamLayout::new(6, 4, 1), 0.4, 6);
        let x = random_steps(2, 6, 7);
        let y = forward(&p, &x, Mode::Eval).unwrap().output.to_vec();
        let (loss, g) = loss_and_grad(&p, &x, &y, Mode::Eval).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.data.iter().all(|v| *v == 0.0));
    }
}

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::seed;

/// Offset and shape of one tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSpan {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpan {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpans {
    /// `4H × H_in`, gate rows ordered input, forget, output, candidate.
    pub w_x: TensorSpan,
    /// `4H × H`.
    pub w_h: TensorSpan,
    /// `4H`.
    pub bias: TensorSpan,
}

/// Flat order: input projection weight and bias, then per layer
/// `w_x, w_h, bias`, then head weight and bias. All row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_in: TensorSpan,
    pub b_in: TensorSpan,
    pub layers: Vec<LayerSpans>,
    pub w_out: TensorSpan,
    pub b_out: TensorSpan,
    pub len: usize,
}

impl ParamLayout {
    pub fn new(input_dim: usize, hidden: usize, layers: usize) -> Self {
        let mut offset = 0;
        let mut take = |rows: usize, cols: usize| {
            let span = TensorSpan { offset, rows, cols };
            offset += rows * cols;
            span
        };
        let w_in = take(hidden, input_dim);
        let b_in = take(1, hidden);
        let layers = (0..layers)
            .map(|_| LayerSpans {
                w_x: take(4 * hidden, hidden),
                w_h: take(4 * hidden, hidden),
                bias: take(1, 4 * hidden),
            })
            .collect();
        let w_out = take(1, hidden);
        let b_out = take(1, 1);
        Self {
            input_dim,
            hidden,
            w_in,
            b_in,
            layers,
            w_out,
            b_out,
            len: offset,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }
}

/// Parameters (or a same-shaped gradient) as one flat `f64` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub layout: ParamLayout,
    pub data: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(layout: ParamLayout) -> Self {
        let data = vec![0.0; layout.len];
        Self { layout, data }
    }

    pub fn matrix(&self, span: TensorSpan) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((span.rows, span.cols), &self.data[span.range()])
            .expect("span fits layout")
    }

    pub fn vector(&self, span: TensorSpan) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.data[span.range()])
    }

    pub fn matrix_mut(&mut self, span: TensorSpan) -> ArrayViewMut2<'_, f64> {
        ArrayViewMut2::from_shape((span.rows, span.cols), &mut self.data[span.range()])
            .expect("span fits layout")
    }

    pub fn vector_mut(&mut self, span: TensorSpan) -> ArrayViewMut1<'_, f64> {
        ArrayViewMut1::from(&mut self.data[span.range()])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Draws from `N(0, σ²)` rejecting samples with `|w| > bound · σ`.
pub(crate) fn truncated_normal<R: Rng>(rng: &mut R, stddev: f64, bound: f64, out: &mut [f64]) {
    let normal = Normal::new(0.0, stddev).expect("positive stddev");
    let limit = bound * stddev;
    for w in out {
        *w = loop {
            let v: f64 = normal.sample(rng);
            if v.abs() <= limit {
                break v;
            }
        };
    }
}

/// Truncated-normal weights everywhere, zero biases except forget gates at 1.
pub fn init_params(config: &ModelConfig, seed: u64) -> LstmParams {
    let layout = config.layout();
    let mut p = LstmParams::zeros(layout.clone());
    let mut rng = seed::rng(seed);
    let mut fill = |p: &mut LstmParams, span: TensorSpan| {
        truncated_normal(
            &mut rng,
            config.init_stddev,
            config.init_truncation,
            &mut p.data[span.range()],
        );
    };
    fill(&mut p, layout.w_in);
    for l in &layout.layers {
        fill(&mut p, l.w_x);
        fill(&mut p, l.w_h);
    }
    fill(&mut p, layout.w_out);
    let h = layout.hidden;
    for l in &layout.layers {
        p.vector_mut(l.bias)
            .slice_mut(ndarray::s![h..2 * h])
            .fill(1.0);
    }
    p
}

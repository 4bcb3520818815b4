use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub(crate) const LAYER_NORM_EPS: f64 = 1e-5;

/// Dense layer `y = x W^T + b` acting on the last axis of a row batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `out x in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    /// Uniform init on `[-1/sqrt(in), 1/sqrt(in)]` for weights and bias.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        Linear {
            weight: Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-bound..=bound)),
            bias: Array1::from_shape_fn(out_dim, |_| rng.gen_range(-bound..=bound)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight.t());
        y += &self.bias;
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.weight += &dy.t().dot(&x);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight)
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f(
            &format!("{prefix}.weight"),
            self.weight.shape(),
            self.weight.as_slice().expect("standard layout"),
        );
        f(
            &format!("{prefix}.bias"),
            self.bias.shape(),
            self.bias.as_slice().expect("standard layout"),
        );
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        let shape = self.weight.shape().to_vec();
        f(
            &format!("{prefix}.weight"),
            &shape,
            self.weight.as_slice_mut().expect("standard layout"),
        );
        let shape = self.bias.shape().to_vec();
        f(
            &format!("{prefix}.bias"),
            &shape,
            self.bias.as_slice_mut().expect("standard layout"),
        );
    }
}

/// Gaussian error linear unit, exact (erf) form.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

/// Row-wise layer normalization without affine terms. Returns the
/// normalized rows and each row's `1 / sqrt(var + eps)`.
pub fn layer_norm(x: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let n = x.ncols() as f64;
    let mut out = x.to_owned();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, s) in out.axis_iter_mut(Axis(0)).zip(inv_std.iter_mut()) {
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        *s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * *s);
    }
    (out, inv_std)
}

/// Backward of [`layer_norm`] given its output `normed` and `inv_std`.
pub fn layer_norm_backward(normed: ArrayView2<f64>, inv_std: &Array1<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
    let n = normed.ncols() as f64;
    let mut dx = Array2::zeros(dy.dim());
    for (r, mut dst) in dx.axis_iter_mut(Axis(0)).enumerate() {
        let g = dy.row(r);
        let y = normed.row(r);
        let mean_g = g.sum() / n;
        let mean_gy = g.dot(&y) / n;
        for t in 0..dst.len() {
            dst[t] = inv_std[r] * (g[t] - mean_g - y[t] * mean_gy);
        }
    }
    dx
}

/// Inverted-dropout keep mask scaled by `1 / (1 - p)`.
pub fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_fn((rows, cols), |_| if rng.gen::<f64>() < p { 0.0 } else { keep })
}

//! Complex-valued linear layers acting on (real, imaginary) planes, and the
//! reachability check for real-weight projections of complex inputs.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::resmlp::ResMlpConfig;
use crate::dft::Planes;
use crate::error::{FrednError, Result};

/// `y = W x + b` with `W = w_re + i w_im`, `b = b_re + i b_im`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexLinear {
    pub w_re: Array2<f64>,
    pub w_im: Array2<f64>,
    pub b_re: Array1<f64>,
    pub b_im: Array1<f64>,
}

impl ComplexLinear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        ComplexLinear {
            w_re: Array2::zeros((out_dim, in_dim)),
            w_im: Array2::zeros((out_dim, in_dim)),
            b_re: Array1::zeros(out_dim),
            b_im: Array1::zeros(out_dim),
        }
    }

    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let mut draw = |shape: (usize, usize)| Array2::from_shape_fn(shape, |_| rng.gen_range(-bound..=bound));
        let w_re = draw((out_dim, in_dim));
        let w_im = draw((out_dim, in_dim));
        let b_re = draw((out_dim, 1)).column(0).to_owned();
        let b_im = draw((out_dim, 1)).column(0).to_owned();
        ComplexLinear { w_re, w_im, b_re, b_im }
    }

    pub fn param_count(&self) -> usize {
        self.w_re.len() + self.w_im.len() + self.b_re.len() + self.b_im.len()
    }

    pub fn forward(&self, x: &Planes) -> Planes {
        let mut re = x.re.dot(&self.w_re.t()) - x.im.dot(&self.w_im.t());
        re += &self.b_re;
        let mut im = x.re.dot(&self.w_im.t()) + x.im.dot(&self.w_re.t());
        im += &self.b_im;
        Planes { re, im }
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Planes, dy: &Planes, grad: &mut ComplexLinear) -> Planes {
        grad.w_re += &(dy.re.t().dot(&x.re) + dy.im.t().dot(&x.im));
        grad.w_im += &(dy.im.t().dot(&x.re) - dy.re.t().dot(&x.im));
        grad.b_re += &dy.re.sum_axis(Axis(0));
        grad.b_im += &dy.im.sum_axis(Axis(0));
        Planes {
            re: dy.re.dot(&self.w_re) + dy.im.dot(&self.w_im),
            im: dy.im.dot(&self.w_re) - dy.re.dot(&self.w_im),
        }
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (name, a) in [("w_re", &self.w_re), ("w_im", &self.w_im)] {
            f(
                &format!("{prefix}.{name}"),
                a.shape(),
                a.as_slice().expect("standard layout"),
            );
        }
        for (name, a) in [("b_re", &self.b_re), ("b_im", &self.b_im)] {
            f(
                &format!("{prefix}.{name}"),
                a.shape(),
                a.as_slice().expect("standard layout"),
            );
        }
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (name, a) in [("w_re", &mut self.w_re), ("w_im", &mut self.w_im)] {
            let shape = a.shape().to_vec();
            f(
                &format!("{prefix}.{name}"),
                &shape,
                a.as_slice_mut().expect("standard layout"),
            );
        }
        for (name, a) in [("b_re", &mut self.b_re), ("b_im", &mut self.b_im)] {
            let shape = a.shape().to_vec();
            f(
                &format!("{prefix}.{name}"),
                &shape,
                a.as_slice_mut().expect("standard layout"),
            );
        }
    }
}

/// Single complex matrix-vector product.
pub fn complex_linear_forward(
    w_re: ArrayView2<f64>,
    w_im: ArrayView2<f64>,
    b_re: &[f64],
    b_im: &[f64],
    x: &[Complex64],
) -> Result<Vec<Complex64>> {
    let (out, inp) = w_re.dim();
    if w_im.dim() != (out, inp) || b_re.len() != out || b_im.len() != out || x.len() != inp {
        return Err(FrednError::dim(format!(
            "complex linear {out}x{inp} cannot take input of length {} with biases {}/{}",
            x.len(),
            b_re.len(),
            b_im.len()
        )));
    }
    Ok((0..out)
        .map(|o| {
            let mut acc = Complex64::new(b_re[o], b_im[o]);
            for (i, xi) in x.iter().enumerate() {
                acc += Complex64::new(w_re[[o, i]], w_im[[o, i]]) * xi;
            }
            acc
        })
        .collect())
}

/// Stack of complex linears with the residual topology of
/// [`ResMlp`](super::ResMlp) but no normalization, activation or dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexResMlp {
    pub config: ResMlpConfig,
    pub hidden: Vec<ComplexLinear>,
    pub residual: Option<ComplexLinear>,
    pub out: ComplexLinear,
}

#[derive(Debug, Clone)]
pub struct ComplexResMlpCache {
    /// Input of every hidden layer; the first entry is the block input.
    inputs: Vec<Planes>,
    merged: Planes,
}

impl ComplexResMlp {
    fn build(config: ResMlpConfig, mut make: impl FnMut(usize, usize) -> ComplexLinear) -> Self {
        let widths = config.widths();
        let mut hidden = Vec::with_capacity(widths.len());
        let mut prev = config.in_len;
        for &w in &widths {
            hidden.push(make(prev, w));
            prev = w;
        }
        let residual = widths.last().map(|&w| make(config.in_len, w));
        let out = make(prev, config.out_len);
        ComplexResMlp {
            config,
            hidden,
            residual,
            out,
        }
    }

    pub fn init(config: ResMlpConfig, rng: &mut ChaCha8Rng) -> Self {
        Self::build(config, |i, o| ComplexLinear::init(i, o, rng))
    }

    pub fn zeros(config: ResMlpConfig) -> Self {
        Self::build(config, ComplexLinear::zeros)
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(ComplexLinear::param_count).sum::<usize>()
            + self.residual.as_ref().map_or(0, ComplexLinear::param_count)
            + self.out.param_count()
    }

    pub fn forward(&self, x: &Planes) -> Result<Planes> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Planes) -> Result<(Planes, ComplexResMlpCache)> {
        if x.re.ncols() != self.config.in_len || x.im.dim() != x.re.dim() {
            return Err(FrednError::dim(format!(
                "complex block expects trailing length {}, got {:?}/{:?}",
                self.config.in_len,
                x.re.dim(),
                x.im.dim()
            )));
        }
        let mut inputs = vec![x.clone()];
        let mut h = x.clone();
        for lin in &self.hidden {
            h = lin.forward(&h);
            inputs.push(h.clone());
        }
        // drop the last hidden output; it is only needed as part of `merged`
        if !self.hidden.is_empty() {
            inputs.pop();
        }
        let merged = match &self.residual {
            Some(res) => {
                let r = res.forward(x);
                Planes {
                    re: h.re + &r.re,
                    im: h.im + &r.im,
                }
            }
            None => h,
        };
        let out = self.out.forward(&merged);
        Ok((out, ComplexResMlpCache { inputs, merged }))
    }

    pub fn backward(&self, cache: &ComplexResMlpCache, dy: &Planes, grad: &mut ComplexResMlp) -> Planes {
        let dmerged = self.out.backward(&cache.merged, dy, &mut grad.out);
        let (res, gres) = match (&self.residual, &mut grad.residual) {
            (Some(r), Some(g)) => (r, g),
            _ => return dmerged,
        };
        let mut dx = res.backward(&cache.inputs[0], &dmerged, gres);
        let mut dh = dmerged;
        for (j, lin) in self.hidden.iter().enumerate().rev() {
            dh = lin.backward(&cache.inputs[j], &dh, &mut grad.hidden[j]);
        }
        dx.re += &dh.re;
        dx.im += &dh.im;
        dx
    }

    pub(crate) fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (j, l) in self.hidden.iter().enumerate() {
            l.visit(&format!("{prefix}.hidden.{j}"), f);
        }
        if let Some(r) = &self.residual {
            r.visit(&format!("{prefix}.residual"), f);
        }
        self.out.visit(&format!("{prefix}.out"), f);
    }

    pub(crate) fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        for (j, l) in self.hidden.iter_mut().enumerate() {
            l.visit_mut(&format!("{prefix}.hidden.{j}"), f);
        }
        if let Some(r) = &mut self.residual {
            r.visit_mut(&format!("{prefix}.residual"), f);
        }
        self.out.visit_mut(&format!("{prefix}.out"), f);
    }
}

/// Outcome of solving `sum_i w_i x_i = z` for real `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reachability {
    /// Minimum-norm least-squares weights.
    pub weights: Vec<f64>,
    /// `|sum_i w_i x_i - z|`.
    pub residual: f64,
    /// Whether the inputs span the whole complex plane over the reals.
    pub full_rank: bool,
}

/// Least-squares real weights projecting the complex vector `x` onto `z`.
///
/// Over the reals, `w . x = z` is the 2 x d system `A w = (Re z, Im z)` with
/// rows `Re x` and `Im x`. It is solvable for every `z` exactly when `A` has
/// rank 2, i.e. when two entries of `x` differ in phase by a non-multiple of
/// pi. Otherwise only targets on the common phase line are reachable.
pub fn reachability(x: &[Complex64], z: Complex64) -> Reachability {
    // Gram matrix G = A A^T and its eigen-decomposition (2 x 2 symmetric)
    let g11: f64 = x.iter().map(|v| v.re * v.re).sum();
    let g22: f64 = x.iter().map(|v| v.im * v.im).sum();
    let g12: f64 = x.iter().map(|v| v.re * v.im).sum();
    let half_tr = 0.5 * (g11 + g22);
    let disc = (0.25 * (g11 - g22).powi(2) + g12 * g12).sqrt();
    let eig = [half_tr + disc, half_tr - disc];
    let vecs = if g12.abs() > 0.0 {
        let v1 = normalize2(eig[0] - g22, g12);
        [v1, [-v1[1], v1[0]]]
    } else if g11 >= g22 {
        [[1.0, 0.0], [0.0, 1.0]]
    } else {
        [[0.0, 1.0], [1.0, 0.0]]
    };
    let tol = 1e-12 * eig[0].max(f64::MIN_POSITIVE);
    let target = [z.re, z.im];
    let mut weights = vec![0.0; x.len()];
    let mut rank = 0;
    for (lambda, e) in eig.iter().zip(vecs) {
        if *lambda <= tol || eig[0] == 0.0 {
            continue;
        }
        rank += 1;
        let coef = (e[0] * target[0] + e[1] * target[1]) / lambda;
        // w += A^T e * coef
        for (w, v) in weights.iter_mut().zip(x) {
            *w += coef * (e[0] * v.re + e[1] * v.im);
        }
    }
    let fit: Complex64 = weights.iter().zip(x).map(|(w, v)| v * *w).sum();
    Reachability {
        residual: (fit - z).norm(),
        weights,
        full_rank: rank == 2,
    }
}

fn normalize2(a: f64, b: f64) -> [f64; 2] {
    let n = a.hypot(b);
    [a / n, b / n]
}

//! Real-input discrete Fourier transforms.
//!
//! Spectra are stored one-sided: a length-`n` real signal maps to
//! `n / 2 + 1` complex bins. The DC bin (and the Nyquist bin when `n` is
//! even) is always purely real.
//!
//! Two scalings are supported. [`Normalization::Unnormalized`] computes
//! `X_k = sum_t x_t exp(-2 pi i k t / n)` and is what the forecasting
//! pipeline uses. [`Normalization::Orthonormal`] scales by `1 / sqrt(n)` so
//! the full transform matrix is unitary.
//!
//! The complex kernels come from `rustfft`, which handles arbitrary lengths
//! (mixed radix with a Bluestein fallback for awkward primes).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{FrednError, Result};

/// A complex scalar with `re` and `im` fields.
pub type ComplexValue = Complex64;

/// Relative tolerance used when checking that DC/Nyquist bins are real.
const HERMITIAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Normalization {
    #[default]
    Unnormalized,
    Orthonormal,
}

impl Normalization {
    fn forward_scale(self, n: usize) -> f64 {
        match self {
            Normalization::Unnormalized => 1.0,
            Normalization::Orthonormal => 1.0 / (n as f64).sqrt(),
        }
    }

    fn inverse_scale(self, n: usize) -> f64 {
        match self {
            Normalization::Unnormalized => 1.0 / n as f64,
            Normalization::Orthonormal => 1.0 / (n as f64).sqrt(),
        }
    }
}

/// One-sided spectrum of one or more real signals (one row per signal).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub data: Array2<Complex64>,
    pub time_len: usize,
    pub normalization: Normalization,
}

impl Spectrum {
    pub fn n_freq(&self) -> usize {
        self.data.ncols()
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    /// Magnitudes `|X_k|`, same layout as `data`.
    pub fn magnitudes(&self) -> Array2<f64> {
        self.data.mapv(|z| z.norm())
    }

    pub fn to_planes(&self) -> Planes {
        Planes {
            re: self.data.mapv(|z| z.re),
            im: self.data.mapv(|z| z.im),
        }
    }
}

/// Number of one-sided bins for a length-`n` real signal.
pub fn n_freq(n: usize) -> usize {
    n / 2 + 1
}

/// Real and imaginary parts of a batch of one-sided spectra, stored as two
/// real matrices with one row per signal. This is the layout the model works
/// in, since every spectral layer acts on the planes separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Planes {
    pub re: Array2<f64>,
    pub im: Array2<f64>,
}

impl Planes {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Planes {
            re: Array2::zeros((rows, cols)),
            im: Array2::zeros((rows, cols)),
        }
    }

    pub fn to_spectrum(&self, time_len: usize, normalization: Normalization) -> Spectrum {
        let data = ndarray::Zip::from(&self.re)
            .and(&self.im)
            .map_collect(|&re, &im| Complex64::new(re, im));
        Spectrum {
            data,
            time_len,
            normalization,
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Forward transform of every row of `x`, written into `re`/`im` (one-sided).
fn rfft_into(x: ArrayView2<f64>, scale: f64, re: &mut Array2<f64>, im: &mut Array2<f64>) {
    let n = x.ncols();
    let nf = n_freq(n);
    let fft = plan(n, false);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for (r, row) in x.axis_iter(Axis(0)).enumerate() {
        for (b, &v) in buf.iter_mut().zip(row.iter()) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..nf {
            re[[r, k]] = buf[k].re * scale;
            im[[r, k]] = buf[k].im * scale;
        }
        im[[r, 0]] = 0.0;
        if n % 2 == 0 {
            im[[r, nf - 1]] = 0.0;
        }
    }
}

/// Inverse transform of every row; imaginary parts of DC/Nyquist are ignored.
fn irfft_into(re: ArrayView2<f64>, im: ArrayView2<f64>, n: usize, scale: f64, out: &mut Array2<f64>) {
    let nf = n_freq(n);
    let fft = plan(n, true);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for r in 0..re.nrows() {
        buf[0] = Complex64::new(re[[r, 0]], 0.0);
        for k in 1..nf {
            let z = Complex64::new(re[[r, k]], im[[r, k]]);
            buf[k] = z;
            if n - k != k {
                buf[n - k] = z.conj();
            }
        }
        if n % 2 == 0 && n > 0 {
            buf[nf - 1] = Complex64::new(re[[r, nf - 1]], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for t in 0..n {
            out[[r, t]] = buf[t].re * scale;
        }
    }
}

/// One-sided transform of a single real vector.
pub fn rfft(x: &[f64], normalization: Normalization) -> Result<Spectrum> {
    let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| FrednError::dim(e.to_string()))?;
    rfft_rows(view, normalization)
}

/// One-sided transform of every row of `x`.
pub fn rfft_rows(x: ArrayView2<f64>, normalization: Normalization) -> Result<Spectrum> {
    let n = x.ncols();
    if n == 0 {
        return Err(FrednError::EmptyInput);
    }
    let planes = rfft_planes_scaled(x, normalization.forward_scale(n));
    Ok(planes.to_spectrum(n, normalization))
}

/// Inverse of [`rfft`]/[`rfft_rows`]; returns one real row per spectrum row.
///
/// Fails if the bin count does not match `n` or if the DC/Nyquist bins carry
/// a non-negligible imaginary part.
pub fn irfft(spec: &Spectrum, n: usize) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(FrednError::EmptyInput);
    }
    let nf = n_freq(n);
    if spec.n_freq() != nf {
        return Err(FrednError::dim(format!(
            "spectrum has {} bins, length {} needs {}",
            spec.n_freq(),
            n,
            nf
        )));
    }
    let peak = spec.data.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let tol = HERMITIAN_TOL * peak.max(1.0);
    let mut real_bins = vec![0];
    if n % 2 == 0 {
        real_bins.push(nf - 1);
    }
    for row in spec.data.axis_iter(Axis(0)) {
        for &k in &real_bins {
            if row[k].im.abs() > tol {
                return Err(FrednError::HermitianViolation {
                    bin: k,
                    imag: row[k].im,
                });
            }
        }
    }
    let planes = spec.to_planes();
    let mut out = Array2::zeros((spec.channels(), n));
    irfft_into(
        planes.re.view(),
        planes.im.view(),
        n,
        spec.normalization.inverse_scale(n),
        &mut out,
    );
    Ok(out)
}

fn rfft_planes_scaled(x: ArrayView2<f64>, scale: f64) -> Planes {
    let nf = n_freq(x.ncols());
    let mut p = Planes::zeros(x.nrows(), nf);
    rfft_into(x, scale, &mut p.re, &mut p.im);
    p
}

/// Unnormalized one-sided transform of every row (pipeline fast path).
pub fn rfft_planes(x: ArrayView2<f64>) -> Planes {
    rfft_planes_scaled(x, 1.0)
}

/// Unnormalized inverse of every row to length `n`. Imaginary parts at DC
/// and Nyquist are discarded, which is how a network-produced spectrum is
/// brought back to the time domain.
pub fn irfft_planes(planes: &Planes, n: usize) -> Array2<f64> {
    debug_assert_eq!(planes.re.ncols(), n_freq(n));
    let mut out = Array2::zeros((planes.re.nrows(), n));
    irfft_into(planes.re.view(), planes.im.view(), n, 1.0 / n as f64, &mut out);
    out
}

/// Adjoint of [`rfft_planes`]: maps a gradient with respect to the
/// (real, imaginary) parts of each bin back to a gradient over time.
///
/// `dx_t = sum_k g_re[k] cos(2 pi k t/n) - g_im[k] sin(2 pi k t/n)`. Interior
/// bins stand for a conjugate pair in the full spectrum, so the inverse
/// transform they are fed through must see them halved.
pub fn rfft_adjoint(grad: &Planes, n: usize) -> Array2<f64> {
    let nf = n_freq(n);
    let mut re = grad.re.clone();
    let mut im = grad.im.clone();
    for k in 1..nf {
        if n - k != k {
            re.column_mut(k).mapv_inplace(|v| 0.5 * v);
            im.column_mut(k).mapv_inplace(|v| 0.5 * v);
        }
    }
    let mut out = Array2::zeros((re.nrows(), n));
    irfft_into(re.view(), im.view(), n, 1.0, &mut out);
    out
}

/// Adjoint of [`irfft_planes`]: gradient over time to gradient over bins.
/// DC/Nyquist imaginary gradients are zero since those inputs are ignored.
pub fn irfft_adjoint(grad: ArrayView2<f64>, n: usize) -> Planes {
    let nf = n_freq(n);
    let mut p = rfft_planes_scaled(grad, 1.0 / n as f64);
    for k in 1..nf {
        if n - k != k {
            p.re.column_mut(k).mapv_inplace(|v| 2.0 * v);
            p.im.column_mut(k).mapv_inplace(|v| 2.0 * v);
        }
    }
    p
}

/// Full (two-sided) transform of a real vector.
pub fn fft_full(x: &[f64], normalization: Normalization) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let s = normalization.forward_scale(n);
    buf.iter_mut().for_each(|z| *z *= s);
    buf
}

/// Inverse of [`fft_full`] under the same normalization (complex output).
pub fn ifft_full(spec: &[Complex64], normalization: Normalization) -> Vec<Complex64> {
    let n = spec.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = spec.to_vec();
    plan(n, true).process(&mut buf);
    let s = normalization.inverse_scale(n);
    buf.iter_mut().for_each(|z| *z *= s);
    buf
}

/// Dense DFT matrix, entry `(k, t) = exp(-2 pi i k t / n)` (times
/// `1/sqrt(n)` when orthonormal).
pub fn dft_matrix(n: usize, normalization: Normalization) -> Result<Array2<Complex64>> {
    if n == 0 {
        return Err(FrednError::EmptyInput);
    }
    let s = normalization.forward_scale(n);
    Ok(Array2::from_shape_fn((n, n), |(k, t)| {
        // reduce the phase index first so large n keeps full precision
        let idx = (k * t) % n;
        Complex64::from_polar(s, -2.0 * PI * idx as f64 / n as f64)
    }))
}

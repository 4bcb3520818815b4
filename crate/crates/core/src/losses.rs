//! Time- and frequency-domain forecasting losses with closed-form gradients.
//!
//! Inputs are `rows x tau` matrices, one row per forecast series (a
//! `(sample, channel)` pair). Per-row losses are averaged over rows.
//!
//! Frequency losses act on the residual spectrum `eps~ = F (y_hat - y)` and
//! are divided by `tau_freq = tau / 2 + 1`. The training objective uses the
//! unnormalized one-sided spectrum; [`SpectrumMode::OrthonormalFull`] uses the
//! unitary full spectrum, where Parseval makes frequency MSE a rescaled time
//! MSE.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dft::{self, Normalization, Planes, Spectrum};
use crate::error::{FrednError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    TimeMse,
    TimeMae,
    FreqMse,
    FreqMae,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::TimeMse,
        LossKind::TimeMae,
        LossKind::FreqMse,
        LossKind::FreqMae,
    ];

    pub fn is_frequency(self) -> bool {
        matches!(self, LossKind::FreqMse | LossKind::FreqMae)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::TimeMse => "time-mse",
            LossKind::TimeMae => "time-mae",
            LossKind::FreqMse => "freq-mse",
            LossKind::FreqMae => "freq-mae",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = FrednError;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FrednError::config(format!("unknown loss kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumMode {
    /// Unnormalized one-sided spectrum (training objective).
    #[default]
    OneSided,
    /// Unitary full spectrum (Parseval checks).
    OrthonormalFull,
}

/// `eps = y_hat - y` and its one-sided unnormalized spectrum.
#[derive(Debug, Clone)]
pub struct Residual {
    pub eps: Array2<f64>,
    pub eps_tilde: Spectrum,
}

impl Residual {
    pub fn new(y_hat: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Self> {
        check_shapes(y_hat, y)?;
        let eps = &y_hat - &y;
        let eps_tilde = dft::rfft_rows(eps.view(), Normalization::Unnormalized)?;
        Ok(Residual { eps, eps_tilde })
    }
}

fn check_shapes(y_hat: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<()> {
    if y_hat.dim() != y.dim() {
        return Err(FrednError::dim(format!(
            "prediction {:?} vs target {:?}",
            y_hat.dim(),
            y.dim()
        )));
    }
    if y.ncols() == 0 || y.nrows() == 0 {
        return Err(FrednError::EmptyInput);
    }
    Ok(())
}

/// `z / |z|`, with 0 where `z = 0`.
pub fn unit_phase(z: Complex64) -> Complex64 {
    let m = z.norm();
    if m > 0.0 {
        z / m
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Unit-modulus phase factors of a spectrum (zero bins map to 0).
pub fn phase_factors(spec: &Spectrum) -> Array2<Complex64> {
    spec.data.mapv(unit_phase)
}

pub fn compute_loss(kind: LossKind, y_hat: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    compute_loss_with(kind, SpectrumMode::OneSided, y_hat, y)
}

pub fn loss_gradient(kind: LossKind, y_hat: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Array2<f64>> {
    loss_gradient_with(kind, SpectrumMode::OneSided, y_hat, y)
}

pub fn compute_loss_with(
    kind: LossKind,
    mode: SpectrumMode,
    y_hat: ArrayView2<f64>,
    y: ArrayView2<f64>,
) -> Result<f64> {
    Ok(loss_and_gradient_with(kind, mode, y_hat, y, false)?.0)
}

pub fn loss_gradient_with(
    kind: LossKind,
    mode: SpectrumMode,
    y_hat: ArrayView2<f64>,
    y: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    Ok(loss_and_gradient_with(kind, mode, y_hat, y, true)?.1)
}

/// Loss and its gradient with respect to `y_hat` in one pass.
pub fn loss_and_gradient(kind: LossKind, y_hat: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    loss_and_gradient_with(kind, SpectrumMode::OneSided, y_hat, y, true)
}

fn loss_and_gradient_with(
    kind: LossKind,
    mode: SpectrumMode,
    y_hat: ArrayView2<f64>,
    y: ArrayView2<f64>,
    want_grad: bool,
) -> Result<(f64, Array2<f64>)> {
    check_shapes(y_hat, y)?;
    let (rows, tau) = y.dim();
    let tau_freq = dft::n_freq(tau) as f64;
    let eps = &y_hat - &y;
    let row_scale = 1.0 / rows as f64;

    let (total, grad) = match kind {
        LossKind::TimeMse => {
            let total = eps.iter().map(|e| e * e).sum::<f64>() / tau as f64;
            let grad = if want_grad {
                eps.mapv(|e| 2.0 * e / tau as f64)
            } else {
                Array2::zeros((0, 0))
            };
            (total, grad)
        }
        LossKind::TimeMae => {
            let total = eps.iter().map(|e| e.abs()).sum::<f64>() / tau as f64;
            let grad = if want_grad {
                eps.mapv(|e| sign(e) / tau as f64)
            } else {
                Array2::zeros((0, 0))
            };
            (total, grad)
        }
        LossKind::FreqMse | LossKind::FreqMae => {
            let squared = kind == LossKind::FreqMse;
            let per_bin = |z: Complex64| if squared { z.norm_sqr() } else { z.norm() };
            // d(per_bin)/d(re, im) packed as a complex number
            let bin_grad = |z: Complex64| if squared { z * 2.0 } else { unit_phase(z) };
            match mode {
                SpectrumMode::OneSided => {
                    let spec = dft::rfft_planes(eps.view());
                    let mut total = 0.0;
                    let mut g = Planes::zeros(rows, spec.re.ncols());
                    for ((gr, gi), (re, im)) in
                        g.re.iter_mut()
                            .zip(g.im.iter_mut())
                            .zip(spec.re.iter().zip(spec.im.iter()))
                    {
                        let z = Complex64::new(*re, *im);
                        total += per_bin(z);
                        let b = bin_grad(z) / tau_freq;
                        *gr = b.re;
                        *gi = b.im;
                    }
                    let grad = if want_grad {
                        dft::rfft_adjoint(&g, tau)
                    } else {
                        Array2::zeros((0, 0))
                    };
                    (total / tau_freq, grad)
                }
                SpectrumMode::OrthonormalFull => {
                    let mut total = 0.0;
                    let mut grad = Array2::zeros((rows, tau));
                    for (row, mut dst) in eps.axis_iter(Axis(0)).zip(grad.axis_iter_mut(Axis(0))) {
                        let spec = dft::fft_full(row.as_slice().expect("contiguous row"), Normalization::Orthonormal);
                        total += spec.iter().map(|z| per_bin(*z)).sum::<f64>();
                        if want_grad {
                            // F^H of the bin gradients; F is unitary so F^H is the inverse
                            let g: Vec<Complex64> = spec.iter().map(|z| bin_grad(*z) / tau_freq).collect();
                            let back = dft::ifft_full(&g, Normalization::Orthonormal);
                            for (d, b) in dst.iter_mut().zip(back) {
                                *d = b.re;
                            }
                        }
                    }
                    (total / tau_freq, grad)
                }
            }
        }
    };
    Ok((total * row_scale, grad * row_scale))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

//! Reversible instance normalization.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{FrednError, Result};

/// Per-row statistics of one lookback window plus the per-channel affine
/// terms. Row `r` belongs to channel `r % gamma.len()`, so a stacked batch of
/// `channels x L` windows is handled the same as a single window.
#[derive(Debug, Clone, PartialEq)]
pub struct RevInState {
    pub mu: Array1<f64>,
    /// Population standard deviation over the lookback.
    pub sigma: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub eps: f64,
}

impl RevInState {
    /// `sqrt(sigma^2 + eps)` per row.
    pub fn scale(&self) -> Array1<f64> {
        self.sigma.mapv(|s| (s * s + self.eps).sqrt())
    }

    pub fn channel(&self, row: usize) -> usize {
        row % self.gamma.len()
    }
}

pub fn revin_normalize(
    x: ArrayView2<f64>,
    gamma: &Array1<f64>,
    beta: &Array1<f64>,
    eps: f64,
) -> Result<(Array2<f64>, RevInState)> {
    let (rows, l) = x.dim();
    if l < 2 {
        return Err(FrednError::dim(format!(
            "normalization needs at least 2 steps, got {l}"
        )));
    }
    if gamma.is_empty() || gamma.len() != beta.len() || rows % gamma.len() != 0 {
        return Err(FrednError::dim(format!(
            "{rows} rows do not match {} affine channels",
            gamma.len()
        )));
    }
    let mu = x.mean_axis(Axis(1)).expect("non-empty rows");
    let sigma = Array1::from_iter(
        x.axis_iter(Axis(0))
            .zip(&mu)
            .map(|(row, m)| (row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / l as f64).sqrt()),
    );
    let state = RevInState {
        mu,
        sigma,
        gamma: gamma.clone(),
        beta: beta.clone(),
        eps,
    };
    let scale = state.scale();
    let mut out = x.to_owned();
    for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let c = state.channel(r);
        let (m, s, g, b) = (state.mu[r], scale[r], gamma[c], beta[c]);
        row.mapv_inplace(|v| g * (v - m) / s + b);
    }
    Ok((out, state))
}

pub fn revin_denormalize(y_norm: ArrayView2<f64>, state: &RevInState) -> Result<Array2<f64>> {
    if y_norm.nrows() != state.mu.len() {
        return Err(FrednError::dim(format!(
            "{} rows vs {} normalized rows",
            y_norm.nrows(),
            state.mu.len()
        )));
    }
    if let Some(channel) = state.gamma.iter().position(|g| *g == 0.0) {
        return Err(FrednError::SingularAffine { channel });
    }
    let scale = state.scale();
    let mut out = y_norm.to_owned();
    for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let c = state.channel(r);
        let (m, s, g, b) = (state.mu[r], scale[r], state.gamma[c], state.beta[c]);
        row.mapv_inplace(|v| s * (v - b) / g + m);
    }
    Ok(out)
}

use std::time::Instant;

use ndarray::{s, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::data::WindowSet;
use crate::error::{FrednError, Result};
use crate::model::{ModelParams, ParamCount};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub mae: f64,
    pub per_horizon_mse: Vec<f64>,
    pub per_horizon_mae: Vec<f64>,
    pub per_channel_mse: Vec<f64>,
    pub per_channel_mae: Vec<f64>,
    pub windows: usize,
    pub runtime_seconds: f64,
    pub param_count: usize,
    pub param_breakdown: ParamCount,
    /// Error of repeating the last lookback value over the horizon.
    pub baseline: Metrics,
}

/// Predictions for every window, `windows x channels x tau`.
pub fn predict_windows(params: &ModelParams, set: &WindowSet, batch_size: usize) -> Result<Array3<f64>> {
    let n = set.len();
    let mut out = Array3::zeros((n, set.channels(), set.horizon));
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, _) = set.batch(chunk);
        let y = params.forward(x.view())?;
        out.slice_mut(s![chunk[0]..chunk[0] + chunk.len(), .., ..]).assign(&y);
    }
    Ok(out)
}

/// Targets of every window, `windows x channels x tau`.
pub fn targets(set: &WindowSet) -> Array3<f64> {
    let idx: Vec<usize> = (0..set.len()).collect();
    set.batch(&idx).1
}

pub fn metrics(pred: &Array3<f64>, target: &Array3<f64>) -> Result<Metrics> {
    if pred.dim() != target.dim() {
        return Err(FrednError::dim(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.is_empty() {
        return Err(FrednError::EmptyInput);
    }
    let err = pred - target;
    let n = err.len() as f64;
    Ok(Metrics {
        mse: err.iter().map(|e| e * e).sum::<f64>() / n,
        mae: err.iter().map(|e| e.abs()).sum::<f64>() / n,
    })
}

/// Repeat-last-value forecast for every window.
pub fn repeat_last_predictions(set: &WindowSet) -> Array3<f64> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let (x, _) = set.batch(&idx);
    let last = x.index_axis(Axis(2), set.lookback - 1).to_owned();
    let mut out = Array3::zeros((set.len(), set.channels(), set.horizon));
    for mut col in out.axis_iter_mut(Axis(2)) {
        col.assign(&last);
    }
    out
}

pub fn repeat_last_baseline(set: &WindowSet) -> Result<Metrics> {
    metrics(&repeat_last_predictions(set), &targets(set))
}

/// Time-domain MSE/MAE over all windows, channels and steps, plus
/// breakdowns and the repeat-last baseline.
pub fn evaluate(params: &ModelParams, set: &WindowSet, batch_size: usize) -> Result<EvalReport> {
    let start = Instant::now();
    let pred = predict_windows(params, set, batch_size)?;
    let runtime_seconds = start.elapsed().as_secs_f64();
    let target = targets(set);
    let overall = metrics(&pred, &target)?;
    let err = &pred - &target;
    let reduce = |axes: [usize; 2], keep: usize| -> (Vec<f64>, Vec<f64>) {
        let count = (err.len() / err.len_of(Axis(keep))) as f64;
        let sq = err.mapv(|e| e * e).sum_axis(Axis(axes[1])).sum_axis(Axis(axes[0]));
        let ab = err.mapv(f64::abs).sum_axis(Axis(axes[1])).sum_axis(Axis(axes[0]));
        (
            sq.iter().map(|v| v / count).collect(),
            ab.iter().map(|v| v / count).collect(),
        )
    };
    let (per_horizon_mse, per_horizon_mae) = reduce([0, 1], 2);
    let (per_channel_mse, per_channel_mae) = reduce([0, 2], 1);
    let breakdown = params.param_count();
    Ok(EvalReport {
        mse: overall.mse,
        mae: overall.mae,
        per_horizon_mse,
        per_horizon_mae,
        per_channel_mse,
        per_channel_mae,
        windows: set.len(),
        runtime_seconds,
        param_count: breakdown.total(),
        param_breakdown: breakdown,
        baseline: repeat_last_baseline(set)?,
    })
}

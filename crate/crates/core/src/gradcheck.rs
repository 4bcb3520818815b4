//! Central finite-difference check of every model parameter gradient.

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Result;
use crate::losses::LossKind;
use crate::model::{ModelConfig, ModelParams, Variant};

pub const DEFAULT_STEP: f64 = 1e-5;
/// Denominator floor for the relative error, relative to `max(1, |loss|)`.
/// Difference quotients carry rounding noise of about `eps * |loss| / step`,
/// so entries below this scale are effectively compared in absolute terms.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Two channels, lookback 16, horizon 8, embedding 2, width 8, no dropout.
pub fn tiny_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        channels: 2,
        lookback: 16,
        horizon: 8,
        embed_dim: 2,
        hidden_size: 8,
        depth: 2,
        dropout: 0.0,
        variant,
        ma_window: 5,
        ..ModelConfig::default()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub variant: Variant,
    pub loss: LossKind,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    /// Worst relative error of each tensor, in parameter order.
    pub per_tensor: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares the analytic gradient with central differences for every scalar.
pub fn gradcheck(
    params: &ModelParams,
    x: &Array3<f64>,
    y: &Array3<f64>,
    loss: LossKind,
    step: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let (value, grad) = params.loss_and_grad(x.view(), y.view(), loss)?;
    let floor = floor * value.abs().max(1.0);
    let analytic = grad.to_flat();
    let layout = params.layout();
    let base = params.to_flat();
    let mut probe = params.clone();
    let mut values = base.clone();
    let mut report = GradCheckReport {
        variant: params.config.variant,
        loss,
        checked: 0,
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        per_tensor: Vec::new(),
    };
    let mut idx = 0;
    for (name, len) in layout {
        let mut tensor_worst = 0.0f64;
        for j in 0..len {
            values[idx] = base[idx] + step;
            probe.set_flat(&values)?;
            let up = probe.loss(x.view(), y.view(), loss)?;
            values[idx] = base[idx] - step;
            probe.set_flat(&values)?;
            let down = probe.loss(x.view(), y.view(), loss)?;
            values[idx] = base[idx];
            let numeric = (up - down) / (2.0 * step);
            let err = relative_error(analytic[idx], numeric, floor);
            tensor_worst = tensor_worst.max(err);
            if err > report.max_rel_err || report.checked == 0 {
                report.max_rel_err = err;
                report.worst_param = format!("{name}[{j}]");
                report.worst_analytic = analytic[idx];
                report.worst_numeric = numeric;
            }
            report.checked += 1;
            idx += 1;
        }
        report.per_tensor.push((name, tensor_worst));
    }
    Ok(report)
}

/// Gradient check on [`tiny_config`] with random parameters and data.
pub fn gradcheck_tiny(variant: Variant, loss: LossKind, seed: u64) -> Result<GradCheckReport> {
    let cfg = tiny_config(variant);
    let mut params = ModelParams::init(&cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    // move the affine terms and embedding off their identity start
    params.visit_mut(&mut |name, _, data| {
        if name.starts_with("revin") || name == "embed.phi" {
            for v in data.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += 0.2 * z;
            }
        }
    });
    let batch = 2;
    let x = Array3::from_shape_fn((batch, cfg.channels, cfg.lookback), |(_, c, t)| {
        let z: f64 = StandardNormal.sample(&mut rng);
        (0.5 * t as f64 + c as f64).sin() + 0.5 * z
    });
    let y = Array3::from_shape_fn((batch, cfg.channels, cfg.horizon), |_| StandardNormal.sample(&mut rng));
    gradcheck(&params, &x, &y, loss, DEFAULT_STEP, DEFAULT_FLOOR)
}

//! Residual MLP: `out(MLP(z) + res(z))`, used along the time axis for the
//! trend and along the frequency axis for the seasonal spectrum.

use ndarray::{Array1, Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{dropout_mask, gelu, gelu_grad, layer_norm, layer_norm_backward, Linear};
use crate::error::{FrednError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResMlpConfig {
    pub in_len: usize,
    pub out_len: usize,
    pub hidden_size: usize,
    /// Number of feedforward blocks. Zero degenerates to one linear map.
    pub depth: usize,
    pub dropout: f64,
}

impl ResMlpConfig {
    /// Block widths, geometrically interpolated from `hidden_size` to
    /// `out_len` (the last width feeds the output projection).
    pub fn widths(&self) -> Vec<usize> {
        match self.depth {
            0 => Vec::new(),
            1 => vec![self.hidden_size],
            k => {
                let h = self.hidden_size as f64;
                let ratio = self.out_len as f64 / h;
                (0..k)
                    .map(|j| {
                        let w = h * ratio.powf(j as f64 / (k - 1) as f64);
                        (w.round() as usize).max(1)
                    })
                    .collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_len == 0 || self.out_len == 0 {
            return Err(FrednError::config("ResMLP lengths must be positive"));
        }
        if self.depth > 0 && self.hidden_size == 0 {
            return Err(FrednError::config("hidden_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(FrednError::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Whether block `j` (0-based) applies layer normalization.
pub(crate) fn block_has_norm(j: usize) -> bool {
    j % 2 == 0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResMlp {
    pub config: ResMlpConfig,
    pub hidden: Vec<Linear>,
    pub residual: Option<Linear>,
    pub out: Linear,
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Array2<f64>,
    /// Input of the activation (post-norm when the block normalizes).
    act_in: Array2<f64>,
    inv_std: Option<Array1<f64>>,
    mask: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct ResMlpCache {
    input: Array2<f64>,
    blocks: Vec<BlockCache>,
    /// Input of the output projection.
    merged: Array2<f64>,
}

impl ResMlp {
    fn build(config: ResMlpConfig, mut make: impl FnMut(usize, usize) -> Linear) -> Self {
        let widths = config.widths();
        let mut hidden = Vec::with_capacity(widths.len());
        let mut prev = config.in_len;
        for &w in &widths {
            hidden.push(make(prev, w));
            prev = w;
        }
        let residual = widths.last().map(|&w| make(config.in_len, w));
        let out = make(prev, config.out_len);
        ResMlp {
            config,
            hidden,
            residual,
            out,
        }
    }

    pub fn init(config: ResMlpConfig, rng: &mut ChaCha8Rng) -> Self {
        Self::build(config, |i, o| Linear::init(i, o, rng))
    }

    pub fn zeros(config: ResMlpConfig) -> Self {
        Self::build(config, Linear::zeros)
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(Linear::param_count).sum::<usize>()
            + self.residual.as_ref().map_or(0, Linear::param_count)
            + self.out.param_count()
    }

    /// Inference forward (no dropout).
    pub fn forward(&self, z: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(z, None)?.0)
    }

    /// Forward pass keeping what the backward pass needs. Dropout is active
    /// only when an RNG is supplied.
    pub fn forward_cached(
        &self,
        z: ArrayView2<f64>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array2<f64>, ResMlpCache)> {
        if z.ncols() != self.config.in_len {
            return Err(FrednError::dim(format!(
                "ResMLP expects trailing length {}, got {}",
                self.config.in_len,
                z.ncols()
            )));
        }
        let mut blocks = Vec::with_capacity(self.hidden.len());
        let mut h = z.to_owned();
        for (j, lin) in self.hidden.iter().enumerate() {
            let pre = lin.forward(h.view());
            let (act_in, inv_std) = if block_has_norm(j) {
                let (n, s) = layer_norm(pre.view());
                (n, Some(s))
            } else {
                (pre, None)
            };
            let mut next = act_in.mapv(gelu);
            let mask = match rng.as_deref_mut() {
                Some(r) if self.config.dropout > 0.0 => {
                    let m = dropout_mask(next.nrows(), next.ncols(), self.config.dropout, r);
                    next *= &m;
                    Some(m)
                }
                _ => None,
            };
            blocks.push(BlockCache {
                input: h,
                act_in,
                inv_std,
                mask,
            });
            h = next;
        }
        let merged = match &self.residual {
            Some(res) => h + &res.forward(z),
            None => h,
        };
        let out = self.out.forward(merged.view());
        Ok((
            out,
            ResMlpCache {
                input: z.to_owned(),
                blocks,
                merged,
            },
        ))
    }

    /// Accumulates parameter gradients into `grad`, returns `dL/dz`.
    pub fn backward(&self, cache: &ResMlpCache, dy: ArrayView2<f64>, grad: &mut ResMlp) -> Array2<f64> {
        let dmerged = self.out.backward(cache.merged.view(), dy, &mut grad.out);
        let mut dz = match (&self.residual, &mut grad.residual) {
            (Some(res), Some(gres)) => res.backward(cache.input.view(), dmerged.view(), gres),
            _ => return dmerged,
        };
        let mut dh = dmerged;
        for (j, (lin, block)) in self.hidden.iter().zip(&cache.blocks).enumerate().rev() {
            if let Some(m) = &block.mask {
                dh *= m;
            }
            let mut dpre = &dh * &block.act_in.mapv(gelu_grad);
            if let Some(s) = &block.inv_std {
                dpre = layer_norm_backward(block.act_in.view(), s, dpre.view());
            }
            dh = lin.backward(block.input.view(), dpre.view(), &mut grad.hidden[j]);
        }
        dz += &dh;
        dz
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

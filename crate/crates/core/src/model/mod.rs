//! The forecasting network and its building blocks.

mod checkpoint;
mod complex;
pub mod layers;
mod network;
mod resmlp;
mod revin;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TensorEntry, CHECKPOINT_VERSION};
pub use complex::{
    complex_linear_forward, reachability, ComplexLinear, ComplexResMlp, ComplexResMlpCache, Reachability,
};
pub use layers::Linear;
pub use network::{ForwardCache, ModelParams, ParamCount, SeasonBlock};
pub use resmlp::{ResMlp, ResMlpCache, ResMlpConfig};
pub use revin::{revin_denormalize, revin_normalize, RevInState};

use serde::{Deserialize, Serialize};

use crate::decomposition::topk_default;
use crate::dft::n_freq;
use crate::error::{FrednError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Learnable frequency gate, shared real MLP on both spectrum planes.
    #[serde(rename = "fredn")]
    FreDN,
    /// Moving-average split in the time domain.
    #[serde(rename = "movdn")]
    MovDN,
    /// Top-K spectral split.
    #[serde(rename = "topkdn")]
    TopKDN,
    /// Frequency gate with complex-valued linears on the seasonal spectrum.
    #[serde(rename = "complex-linear")]
    ComplexLinear,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::FreDN, Variant::MovDN, Variant::TopKDN, Variant::ComplexLinear];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FreDN => "fredn",
            Variant::MovDN => "movdn",
            Variant::TopKDN => "topkdn",
            Variant::ComplexLinear => "complex-linear",
        }
    }

    pub fn uses_mask(self) -> bool {
        matches!(self, Variant::FreDN | Variant::ComplexLinear)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = FrednError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == lower)
            .ok_or_else(|| FrednError::config(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub channels: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub depth: usize,
    pub dropout: f64,
    pub variant: Variant,
    pub ma_window: usize,
    /// Retained bins for TopKDN; `None` means `floor(log2 lookback)`.
    pub top_k: Option<usize>,
    pub mask_init_order: f64,
    pub revin_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 1,
            lookback: 96,
            horizon: 96,
            embed_dim: 8,
            hidden_size: 128,
            depth: 2,
            dropout: 0.1,
            variant: Variant::FreDN,
            ma_window: 25,
            top_k: None,
            mask_init_order: 1.0,
            revin_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    pub fn lookback_freq(&self) -> usize {
        n_freq(self.lookback)
    }

    pub fn horizon_freq(&self) -> usize {
        n_freq(self.horizon)
    }

    pub fn top_k(&self) -> usize {
        self.top_k.unwrap_or_else(|| topk_default(self.lookback))
    }

    pub fn trend_mlp(&self) -> ResMlpConfig {
        ResMlpConfig {
            in_len: self.lookback,
            out_len: self.horizon,
            hidden_size: self.hidden_size,
            depth: self.depth,
            dropout: self.dropout,
        }
    }

    pub fn season_mlp(&self) -> ResMlpConfig {
        ResMlpConfig {
            in_len: self.lookback_freq(),
            out_len: self.horizon_freq(),
            hidden_size: self.hidden_size,
            depth: self.depth,
            dropout: self.dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(FrednError::config("channels must be positive"));
        }
        if self.lookback < 2 {
            return Err(FrednError::config("lookback must be at least 2"));
        }
        if self.horizon == 0 {
            return Err(FrednError::config("horizon must be positive"));
        }
        if self.embed_dim == 0 {
            return Err(FrednError::config("embed_dim must be positive"));
        }
        if !(self.revin_eps > 0.0) {
            return Err(FrednError::config("revin_eps must be positive"));
        }
        self.trend_mlp().validate()?;
        match self.variant {
            Variant::MovDN => {
                if self.ma_window % 2 == 0 || self.ma_window > self.lookback {
                    return Err(FrednError::config(format!(
                        "moving-average window {} must be odd and at most the lookback {}",
                        self.ma_window, self.lookback
                    )));
                }
            }
            Variant::TopKDN => {
                let k = self.top_k();
                if k == 0 || k > self.lookback_freq() {
                    return Err(FrednError::config(format!(
                        "top_k {k} outside [1, {}]",
                        self.lookback_freq()
                    )));
                }
            }
            Variant::FreDN | Variant::ComplexLinear => {
                if !(self.mask_init_order >= 1.0) {
                    return Err(FrednError::config("mask_init_order must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

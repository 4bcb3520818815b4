//! Run configuration: flat JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fredn_core::training::TrainConfig;
use fredn_core::FrednError;
use serde_json::{Map, Value};

use crate::{DataArgs, HyperArgs};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Reads a flat JSON object. `data` and `out` are paths; every other key
    /// must be a training option.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FrednError::config(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| FrednError::config(format!("config {}: {e}", path.display())))?;
        let Value::Object(mut map) = value else {
            return Err(FrednError::config(format!("config {} must be a JSON object", path.display())).into());
        };
        let mut take_path = |key: &str| -> Result<Option<PathBuf>> {
            match map.remove(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(PathBuf::from(s))),
                Some(other) => {
                    Err(FrednError::config(format!("config key '{key}' must be a string, got {other}")).into())
                }
            }
        };
        let data = take_path("data")?;
        let out = take_path("out")?;
        let train: TrainConfig = serde_json::from_value(Value::Object(map))
            .map_err(|e| FrednError::config(format!("config {}: {e}", path.display())))?;
        Ok(RunConfig { data, out, train })
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        if let Some(d) = &self.data {
            map.insert("data".into(), Value::String(d.display().to_string()));
        }
        if let Some(o) = &self.out {
            map.insert("out".into(), Value::String(o.display().to_string()));
        }
        if let Value::Object(train) = serde_json::to_value(&self.train).expect("config serializes") {
            map.extend(train);
        }
        Value::Object(map)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

pub fn apply_hyper(cfg: &mut TrainConfig, h: &HyperArgs) -> Result<()> {
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = v;
            }
        };
    }
    set!(lookback, h.lookback);
    set!(horizon, h.horizon);
    set!(ma_window, h.ma_window);
    set!(seed, h.seed);
    set!(embed_dim, h.embed_dim);
    set!(hidden_size, h.hidden);
    set!(depth, h.depth);
    set!(dropout, h.dropout);
    set!(lr, h.lr);
    set!(epochs, h.epochs);
    set!(patience, h.patience);
    set!(batch_size, h.batch);
    if h.top_k.is_some() {
        cfg.top_k = h.top_k;
    }
    if let Some(v) = &h.variant {
        cfg.variant = v.parse()?;
    }
    if let Some(v) = &h.loss {
        cfg.loss = v.parse()?;
    }
    if let Some(v) = &h.schedule {
        cfg.schedule = v.parse()?;
    }
    Ok(())
}

pub fn apply_data(cfg: &mut TrainConfig, d: &DataArgs) {
    if d.ett {
        cfg.ett = true;
    }
    if d.no_standardize {
        cfg.standardize = false;
    }
    if d.max_rows.is_some() {
        cfg.max_rows = d.max_rows;
    }
}

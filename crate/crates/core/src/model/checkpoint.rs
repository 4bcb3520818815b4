//! JSON checkpoints: `{"version", "config", "tensors": {name: {shape, data}}}`
//! with row-major data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::ModelParams;
use super::ModelConfig;
use crate::error::{FrednError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub tensors: BTreeMap<String, TensorEntry>,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams) -> Self {
        let mut tensors = BTreeMap::new();
        params.visit(&mut |name, shape, data| {
            tensors.insert(
                name.to_string(),
                TensorEntry {
                    shape: shape.to_vec(),
                    data: data.to_vec(),
                },
            );
        });
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: params.config.clone(),
            tensors,
        }
    }

    pub fn into_params(self) -> Result<ModelParams> {
        if self.version != CHECKPOINT_VERSION {
            return Err(FrednError::config(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.config.validate()?;
        let mut params = ModelParams::zeros(&self.config);
        let mut problem = None;
        let mut seen = 0;
        params.visit_mut(&mut |name, shape, data| {
            match self.tensors.get(name) {
                Some(t) if t.shape == shape && t.data.len() == data.len() => data.copy_from_slice(&t.data),
                Some(t) => {
                    problem.get_or_insert(format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape));
                }
                None => {
                    problem.get_or_insert(format!("tensor {name} is missing"));
                }
            }
            seen += 1;
        });
        if let Some(p) = problem {
            return Err(FrednError::config(p));
        }
        if seen != self.tensors.len() {
            return Err(FrednError::config(format!(
                "checkpoint has {} tensors, model has {seen}",
                self.tensors.len()
            )));
        }
        Ok(params)
    }
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(file, &Checkpoint::from_params(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let ck: Checkpoint = serde_json::from_reader(file)?;
    ck.into_params()
}

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FrednError, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Halve the rate every epoch.
    Typ1,
    Cosine,
    Constant,
}

impl Schedule {
    pub fn name(self) -> &'static str {
        match self {
            Schedule::Typ1 => "typ1",
            Schedule::Cosine => "cosine",
            Schedule::Constant => "constant",
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Schedule {
    type Err = FrednError;

    fn from_str(s: &str) -> Result<Self> {
        [Schedule::Typ1, Schedule::Cosine, Schedule::Constant]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FrednError::config(format!("unknown schedule '{s}'")))
    }
}

/// Learning rate for a 1-based `epoch`.
pub fn lr_schedule(kind: Schedule, base_lr: f64, epoch: usize, max_epochs: usize) -> f64 {
    let e = epoch.max(1) as f64;
    match kind {
        Schedule::Typ1 => base_lr * 0.5f64.powf(e - 1.0),
        Schedule::Cosine => base_lr * 0.5 * (1.0 + (PI * (e - 1.0) / max_epochs.max(1) as f64).cos()),
        Schedule::Constant => base_lr,
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(FrednError::dim(format!(
                "optimizer holds {} entries, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) -> Result<()> {
        let mut flat = params.to_flat();
        self.step_slice(&mut flat, &grads.to_flat(), lr)?;
        params.set_flat(&flat)
    }
}

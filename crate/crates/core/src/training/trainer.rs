use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{prepare, Dataset, PreparedData, SplitRatios, WindowSet};
use super::optim::{lr_schedule, Adam, Schedule};
use crate::error::{FrednError, Result};
use crate::losses::LossKind;
use crate::model::{ModelConfig, ModelParams, Variant};

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub schedule: Schedule,
    pub loss: LossKind,
    pub seed: u64,
    pub variant: Variant,
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub depth: usize,
    pub dropout: f64,
    pub ma_window: usize,
    pub top_k: Option<usize>,
    pub mask_init_order: f64,
    /// 6:2:2 split instead of 7:1:2.
    pub ett: bool,
    /// Dataset-level z-scoring fitted on the training rows.
    pub standardize: bool,
    /// Use only the first `max_rows` rows of the dataset.
    pub max_rows: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        TrainConfig {
            lookback: m.lookback,
            horizon: m.horizon,
            batch_size: 32,
            lr: 1e-3,
            epochs: 20,
            patience: 5,
            schedule: Schedule::Typ1,
            loss: LossKind::FreqMae,
            seed: 2025,
            variant: m.variant,
            embed_dim: m.embed_dim,
            hidden_size: m.hidden_size,
            depth: m.depth,
            dropout: m.dropout,
            ma_window: m.ma_window,
            top_k: m.top_k,
            mask_init_order: m.mask_init_order,
            ett: false,
            standardize: true,
            max_rows: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.horizon == 0 {
            return Err(FrednError::config("lookback and horizon must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(FrednError::config("batch size must be positive"));
        }
        if self.epochs == 0 {
            return Err(FrednError::config("epochs must be positive"));
        }
        if self.patience == 0 || self.patience > self.epochs {
            return Err(FrednError::config(format!(
                "patience must be in [1, epochs = {}], got {}",
                self.epochs, self.patience
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(FrednError::config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }

    pub fn model_config(&self, channels: usize) -> ModelConfig {
        ModelConfig {
            channels,
            lookback: self.lookback,
            horizon: self.horizon,
            embed_dim: self.embed_dim,
            hidden_size: self.hidden_size,
            depth: self.depth,
            dropout: self.dropout,
            variant: self.variant,
            ma_window: self.ma_window,
            top_k: self.top_k,
            mask_init_order: self.mask_init_order,
            ..ModelConfig::default()
        }
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios::for_family(self.ett)
    }

    /// Splits, standardizes and windows `dataset` as this config prescribes.
    pub fn prepare(&self, dataset: &Dataset) -> Result<PreparedData> {
        let mut data = dataset.clone();
        if let Some(n) = self.max_rows {
            data.truncate(n);
        }
        prepare(
            &data,
            self.split_ratios(),
            self.lookback,
            self.horizon,
            self.standardize,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Mean loss over all windows of `set`, evaluated in batches without dropout.
pub fn mean_loss(params: &ModelParams, set: &WindowSet, loss: LossKind, batch_size: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = set.batch(chunk);
        total += params.loss(x.view(), y.view(), loss)? * chunk.len() as f64;
    }
    Ok(total / set.len() as f64)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains from freshly initialized parameters.
pub fn train(data: &PreparedData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let params = ModelParams::init(&cfg.model_config(data.train.channels()), cfg.seed)?;
    train_from(params, data, cfg)
}

/// Adam over shuffled mini-batches with per-epoch learning-rate decay and
/// early stopping on the validation loss. Shuffling and dropout draw from
/// ChaCha streams keyed by `(seed, epoch, step)`.
pub fn train_from(mut params: ModelParams, data: &PreparedData, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut opt = Adam::new(params.param_count().total());
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (params.clone(), 0usize, f64::INFINITY);
    let mut bad_epochs = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        let lr = lr_schedule(cfg.schedule, cfg.lr, epoch, cfg.epochs);
        order.sort_unstable();
        order.shuffle(&mut stream_rng(cfg.seed, epoch as u64));
        let mut train_total = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = data.train.batch(chunk);
            let mut dropout_rng = stream_rng(cfg.seed.wrapping_add(1), ((epoch as u64) << 32) | step as u64);
            let (loss, grad) = params.loss_and_grad_with(x.view(), y.view(), cfg.loss, Some(&mut dropout_rng))?;
            let diverged = !loss.is_finite() || {
                let mut bad = false;
                grad.visit(&mut |_, _, g| bad |= g.iter().any(|v| !v.is_finite()));
                bad
            };
            if diverged {
                return Err(FrednError::Divergence { epoch, step });
            }
            opt.step(&mut params, &grad, lr)?;
            train_total += loss * chunk.len() as f64;
        }
        let train_loss = train_total / order.len() as f64;
        let val_loss = mean_loss(&params, &data.val, cfg.loss, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(FrednError::Divergence {
                epoch,
                step: order.len().div_ceil(cfg.batch_size),
            });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        if val_loss < best.2 {
            best = (params.clone(), epoch, val_loss);
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.patience {
                stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best.0,
        history,
        best_epoch: best.1,
        best_val_loss: best.2,
        stopped_early,
    })
}

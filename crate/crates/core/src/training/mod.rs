//! Windowing, splits, optimization and evaluation.

mod data;
mod eval;
mod optim;
mod trainer;

pub use data::{
    chronological_split, make_windows, prepare, Dataset, PreparedData, SplitRanges, SplitRatios, Standardizer,
    WindowSet,
};
pub use eval::{
    evaluate, metrics, predict_windows, repeat_last_baseline, repeat_last_predictions, targets, EvalReport, Metrics,
};
pub use optim::{lr_schedule, Adam, Schedule};
pub use trainer::{mean_loss, train, train_from, EpochRecord, TrainConfig, TrainOutcome};

//! Frequency-domain decomposition forecasting.
//!
//! A learnable per-bin sigmoid gate splits the spectrum of each lookback
//! window into trend and seasonal shares. The trend is forecast in the time
//! domain; the seasonal spectrum goes through a real-valued MLP applied with
//! shared weights to its real and imaginary planes. All layers carry
//! hand-written backward passes, checked against finite differences.

pub mod decomposition;
pub mod dft;
pub mod error;
pub mod gradcheck;
pub mod losses;
pub mod model;
pub mod signal;
pub mod training;

pub use error::{FrednError, Result};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FrednError>;

#[derive(Debug, Error)]
pub enum FrednError {
    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("spectrum is not Hermitian-consistent: bin {bin} has imaginary part {imag:e}")]
    HermitianViolation { bin: usize, imag: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("singular affine map: gamma is zero for channel {channel}")]
    SingularAffine { channel: usize },

    #[error("training diverged (non-finite loss) at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FrednError {
    pub fn dim(msg: impl Into<String>) -> Self {
        FrednError::Dimension(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        FrednError::Config(msg.into())
    }
}

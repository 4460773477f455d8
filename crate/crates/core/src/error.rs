use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the workbench.
///
/// `NotStegoFormatted` is deliberately separate from `Argument`: it signals
/// that carrier samples cannot be interpreted under an app's encoding (for
/// example an alpha value outside {254, 255} on an alpha-channel carrier)
/// and detectors turn it into a negative verdict rather than a failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("PNG decode error: {0}")]
    Decode(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("payload of {needed} bits exceeds capacity of {available} bits")]
    Capacity { needed: u64, available: u64 },

    #[error("capacity too small: {0}")]
    CapacityTooSmall(String),

    #[error("message would be ambiguous: {0}")]
    Ambiguous(String),

    #[error("carrier is not formatted as {app} stego data: {reason}")]
    NotStegoFormatted { app: &'static str, reason: String },

    #[error("signature config error: {0}")]
    SignatureConfig(String),

    #[error("classifier fit failed: {0}")]
    Fit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

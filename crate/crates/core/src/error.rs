//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by the simulation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Spreading factor outside the supported 7..=12 range.
    #[error("spreading factor {0} is outside the supported range 7..=12")]
    SpreadingFactorOutOfRange(u8),

    /// Symbol index does not fit in the alphabet of the given config.
    #[error("symbol index {index} out of range for N = {n}")]
    SymbolIndexOutOfRange { index: usize, n: usize },

    /// A waveform had the wrong number of samples for the operation.
    #[error("expected {expected} samples, got {got}")]
    SampleCountMismatch { expected: usize, got: usize },

    /// A waveform had the wrong sample rate for the operation.
    #[error("expected sample rate {expected} Hz, got {got} Hz")]
    SampleRateMismatch { expected: f64, got: f64 },

    /// A parameter violated a domain precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Power normalization of an all-zero waveform.
    #[error("cannot normalize a waveform with zero energy")]
    ZeroEnergyWaveform,

    /// Requested segment longer than the source waveform.
    #[error("segment of {requested} samples exceeds waveform length {available}")]
    SegmentTooLong { requested: usize, available: usize },

    /// Descending INR scan started below the error region.
    #[error(
        "no symbol errors at start INR {start_inr_db:.2} dB over {trials} trials; \
         raise start_inr_db so the scan begins above the zero-SER threshold"
    )]
    ScanStartErrorFree { start_inr_db: f64, trials: u64 },

    /// Descending INR scan walked 80 dB below its start without a zero-error level.
    #[error(
        "INR scan reached the floor {floor_db:.2} dB (start − 80 dB) without finding \
         a zero-error level; the scenario appears error-prone at any INR"
    )]
    ScanFloorReached { floor_db: f64 },

    /// Least-squares design matrix is rank deficient.
    #[error("rank-deficient fit: {0}")]
    RankDeficientFit(String),

    /// Threshold-model evaluation or fitting at/below the pole.
    #[error("SNR {snr_db:.2} dB is at or below the model pole {pole_db:.2} dB")]
    SnrAtOrBelowPole { snr_db: f64, pole_db: f64 },

    /// Parameter sets that cannot be compared.
    #[error("mismatched fit parameters: {0}")]
    MismatchedFitParams(String),

    /// Config document parse failure.
    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// I/O failure while reading config or writing results.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

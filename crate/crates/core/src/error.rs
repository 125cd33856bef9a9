use thiserror::Error;

/// Errors raised by the processing chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular reference spectrum: {bins} occupied bin(s) below {floor:e} of the peak magnitude; use regularized zero forcing")]
    SingularSpectrum { bins: usize, floor: f64 },

    #[error("target {index} at delay {delay_s:e} s lies outside the fast-time window [{start_s:e}, {end_s:e}] s")]
    TargetOutsideWindow {
        index: usize,
        delay_s: f64,
        start_s: f64,
        end_s: f64,
    },

    #[error("degenerate impulse response: peak is only {peak_over_median_db:.2} dB above the median")]
    DegenerateResponse { peak_over_median_db: f64 },

    #[error("sample rate mismatch: data at {data_hz} Hz, pulse at {pulse_hz} Hz (resample the pulse by {factor})")]
    SampleRateMismatch {
        data_hz: f64,
        pulse_hz: f64,
        factor: f64,
    },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

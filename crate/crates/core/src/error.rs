use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid {width}x{height}: sides must be powers of two and at least 2")]
    InvalidDimensions { width: usize, height: usize },

    #[error("expected {expected} samples, got {actual}")]
    SampleCount { expected: usize, actual: usize },

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("spectrum is not Hermitian (relative defect {defect:.3e})")]
    NonHermitianSpectrum { defect: f64 },

    #[error("input is not zero-mean (mean {mean:.3e}, range {range:.3e})")]
    NotZeroMean { mean: f64, range: f64 },

    #[error("TV-ball bisection could not bracket radius {radius} within {steps} steps")]
    BisectionStall { radius: f64, steps: usize },

    #[error("scale {scale} does not fit a {width}x{height} grid")]
    ScaleOutOfRange {
        scale: i32,
        width: usize,
        height: usize,
    },

    #[error("direction index {index} invalid for {count} directions")]
    BadDirectionIndex { index: usize, count: usize },

    #[error("frequency {frequency} needs scale {scale}, which exceeds the grid's Nyquist limit")]
    FrequencyOutOfRange { frequency: f64, scale: i32 },

    #[error("scene spec out of range: {0}")]
    SpecOutOfRange(String),

    #[error("noise cutoff {cutoff} exceeds the Nyquist limit of a {size}-point grid")]
    CutoffOutOfRange { cutoff: usize, size: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

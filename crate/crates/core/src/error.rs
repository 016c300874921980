use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter was outside its admissible range.
    InvalidParameter { name: &'static str, value: f64, expected: &'static str },
    /// A bid batch violated its construction invariants.
    InvalidBatch(&'static str),
    /// A non-finite value reached an operation that requires finite input.
    NonFinite(&'static str),
    EmptyDistribution,
    InsufficientCalibration { samples: usize, resolution: usize },
    QuantileKeepsNoSamples { q: f64, n: usize },
    EmptyCandidates,
    EmptyGrid,
    EmptyObservations,
    UnfittedModel,
    TooFewSamples { needed: usize, got: usize },
    TooFewReplications { needed: usize, got: usize },
    SampleBudgetTooSmall(u64),
    UnsupportedCase(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, value, expected } => {
                write!(f, "invalid {name} = {value}: expected {expected}")
            }
            Error::InvalidBatch(msg) => write!(f, "invalid bid batch: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite {what}"),
            Error::EmptyDistribution => f.write_str("empty distribution"),
            Error::InsufficientCalibration { samples, resolution } => write!(
                f,
                "insufficient calibration: {samples} draws for a quantile grid of resolution {resolution}"
            ),
            Error::QuantileKeepsNoSamples { q, n } => {
                write!(f, "quantile keeps no samples (q = {q}, n = {n})")
            }
            Error::EmptyCandidates => f.write_str("empty quantile candidate list"),
            Error::EmptyGrid => f.write_str("empty reserve grid"),
            Error::EmptyObservations => f.write_str("no demand observations to fit"),
            Error::UnfittedModel => f.write_str("demand model has not been fitted"),
            Error::TooFewSamples { needed, got } => {
                write!(f, "need at least {needed} samples, got {got}")
            }
            Error::TooFewReplications { needed, got } => {
                write!(f, "replications below {needed} (got {got})")
            }
            Error::SampleBudgetTooSmall(n) => {
                write!(f, "sample budget {n} too small for at least one sample per arm")
            }
            Error::UnsupportedCase(what) => write!(f, "unsupported case: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}

use thiserror::Error;

/// Errors raised by constructors and operations whose preconditions fail.
///
/// Mathematical condition failures (a weight inequality that does not hold,
/// a bound that is exceeded) are not errors; they are reported through the
/// `pass` flags of the various report types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite coordinate ({re}, {im})")]
    NonFinite { re: f64, im: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("level {n} is below the first admissible level {n0}")]
    IndexOutOfRange { n: usize, n0: usize },

    #[error("evaluation at the singularity z = 0")]
    Singularity,

    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    #[error("no sample nodes: {0}")]
    EmptySample(String),

    #[error("holomorphic correction at level {level} reached gap {achieved:.3e} > target {target:.3e} (degree {degree})")]
    CorrectionFailure {
        level: usize,
        achieved: f64,
        target: f64,
        degree: usize,
    },

    #[error("weight family is not admissible: {0}")]
    Admissibility(String),

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

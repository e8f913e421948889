use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular transmitter colocation")]
    TransmitterColocation,

    #[error("covariance not PSD")]
    CovarianceNotPsd,

    #[error("indoor measurement forbidden at ({x:.3}, {y:.3})")]
    IndoorMeasurement { x: f64, y: f64 },

    #[error("location ({x:.3}, {y:.3}) outside the surveyed area")]
    OutOfArea { x: f64, y: f64 },

    #[error("duplicate noiseless measurements")]
    DuplicateNoiselessMeasurements,

    #[error("degenerate repeated noiseless measurement")]
    DegenerateMeasurement,

    #[error("all grid points are buildings")]
    NoFreeSpace,

    #[error("grid points {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),

    #[error("grid point {0} is inside a building")]
    BlockedNode(usize),

    #[error("destination disconnected")]
    DestinationDisconnected,

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("map format error on line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("measurement {index}: {source}")]
    AtMeasurement {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Bridge(#[from] crate::bridge::BridgeError),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_measurement(self, index: usize) -> Self {
        Error::AtMeasurement {
            index,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through measurement-index wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtMeasurement { source, .. } => source.root(),
            e => e,
        }
    }
}

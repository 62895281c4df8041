use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Both PSC accumulation sums vanished, so the phase is undefined.
    #[error("degenerate PSC vector: phase undefined")]
    DegenerateVector,

    /// The two angles are antipodal and have no shorter arc.
    #[error("degenerate circular mean: antipodal inputs")]
    DegenerateMean,

    #[error("no motion: centroids coincide")]
    NoMotion,

    #[error("malformed stream: {0}")]
    MalformedStream(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("data error at line {line}: {msg}")]
    Data { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 config, 3 data (including I/O), 4 statistical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter(_) => 2,
            Error::Data { .. } | Error::MalformedStream(_) | Error::Io(_) => 3,
            Error::DegenerateVector
            | Error::DegenerateMean
            | Error::NoMotion
            | Error::DegenerateSeries(_)
            | Error::InsufficientData { .. }
            | Error::UndefinedRatio(_) => 4,
        }
    }
}

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::types::AntennaId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}:{line}: malformed line: {reason}", path.display())]
    MalformedLine {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("duplicate antenna id {0}")]
    DuplicateAntenna(AntennaId),

    #[error("antenna {0}: coordinates out of range")]
    CoordinateOutOfRange(AntennaId),

    #[error("{context}: unknown antenna {antenna}")]
    UnknownAntenna { antenna: AntennaId, context: String },

    #[error("antenna registry is empty")]
    EmptyRegistry,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid fixture: {0}")]
    InvalidFixture(String),

    #[error("no antenna within the zone radius of match {0}")]
    EmptyZone(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: u64, reason: impl Into<String>) -> Self {
        Error::MalformedLine {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::ConfigInvalid(msg.into())
    }
}

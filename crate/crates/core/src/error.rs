use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::hetgraph::{RelId, VertexId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{origin}:{line}: {msg}")]
    Parse {
        origin: String,
        line: usize,
        msg: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("edge row {line}: {msg}")]
    EdgeRow { line: usize, msg: String },

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("unknown vertex id {0}")]
    UnknownVertexId(u32),

    #[error("no instance of relation type {rel} at vertex {vertex}")]
    EmptyRelation { vertex: VertexId, rel: RelId },

    #[error("no training signal: every labeled pair is disconnected")]
    NoTrainingSignal,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(origin: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad user input (files, arguments) rather than
    /// an internal failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::EmptyRelation { .. } | Error::UnknownVertexId(_) | Error::Mismatch(_)
        )
    }
}

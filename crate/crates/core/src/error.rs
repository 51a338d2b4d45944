use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{context}, line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite gradient while training on ade #{ade} ({ade_term}) and drug #{drug} ({drug_term})")]
    NonFinite {
        ade: usize,
        drug: usize,
        ade_term: String,
        drug_term: String,
    },

    #[error("unknown term: {0}")]
    NotFound(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("stage `{stage}` failed on {file}: {message} [{counters}]")]
    Stage {
        stage: String,
        file: String,
        message: String,
        counters: String,
    },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

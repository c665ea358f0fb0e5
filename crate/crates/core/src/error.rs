use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symbol {symbol} is not an input symbol of an alphabet with {size} input symbols")]
    SymbolOutOfAlphabet { symbol: usize, size: usize },

    #[error("character {0:?} is not a symbol of this alphabet")]
    UnknownCharacter(char),

    #[error("invalid automaton: {0}")]
    InvalidSpec(String),

    #[error("gene {index} has value {value}, outside [0, {bound})")]
    GeneOutOfRange { index: usize, value: u32, bound: u32 },

    #[error("chromosome has {actual} genes, expected {expected}")]
    ChromosomeLength { expected: usize, actual: usize },

    #[error("episode already terminated")]
    EpisodeDone,

    #[error("action {0:?} is not available in this environment")]
    InvalidAction(crate::env::AgentAction),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failing run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownCharacter(_)
                | Error::Json { .. }
                | Error::InvalidSpec(_)
                | Error::GeneOutOfRange { .. }
                | Error::ChromosomeLength { .. }
        ) || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

use std::path::PathBuf;

use thiserror::Error;

use crate::oracle::OracleError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid lexicon: {0}")]
    Lexicon(String),

    /// A structured data row failed validation. `row` is 1-based and excludes the header.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    /// A text document failed validation. `line` is 1-based.
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid rule: {0}")]
    Rule(String),

    #[error("no sensitive features to build rules from")]
    NoSensitiveFeatures,

    #[error("feature `{feature}` would produce {count} rules, above the cap of {cap}")]
    TooManyRules {
        feature: String,
        count: u128,
        cap: usize,
    },

    #[error("no seed available on the {side} side of `{rule_set}`")]
    NoSeed { side: &'static str, rule_set: String },

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error("scoring `{rule_set}` failed after {num} paired samples: {source}")]
    Scoring {
        rule_set: String,
        num: usize,
        #[source]
        source: OracleError,
    },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("training produced a non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("counter-sample budget exhausted: found {found} of {requested} after {attempts} attempts")]
    CounterSampleBudget {
        found: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

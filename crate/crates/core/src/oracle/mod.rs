//! The model under test as an opaque sample-to-label function.

mod mlp;
mod subprocess;

use std::time::Duration;

use thiserror::Error;

use crate::data::Sample;

pub(crate) use mlp::activate;
pub use mlp::{Activation, InputEncoding, Layer, MlpModel, MlpOracle, Normalization};
pub use subprocess::SubprocessOracle;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("failed to start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("oracle process exited: {0}")]
    Exited(String),
    #[error("malformed oracle response `{line}`: {reason}")]
    Malformed { line: String, reason: String },
    #[error("oracle did not answer within {0:?}")]
    Timeout(Duration),
    #[error("oracle answered id {0}, which was not requested")]
    UnexpectedId(u64),
    #[error("oracle never answered id {0}")]
    MissingId(u64),
    #[error("input width {got} does not match the first layer width {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("this oracle cannot evaluate {0} samples")]
    UnsupportedInput(&'static str),
    #[error("oracle I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Black-box model: a batch of samples in, one label per sample out.
///
/// Implementations must be deterministic within a session.
pub trait PredictionOracle: Send + Sync {
    fn predict_batch(&self, samples: &[Sample]) -> Result<Vec<String>, OracleError>;

    fn predict(&self, sample: &Sample) -> Result<String, OracleError> {
        let mut out = self.predict_batch(std::slice::from_ref(sample))?;
        Ok(out.pop().expect("one label per sample"))
    }
}

impl<T: PredictionOracle + ?Sized> PredictionOracle for &T {
    fn predict_batch(&self, samples: &[Sample]) -> Result<Vec<String>, OracleError> {
        (**self).predict_batch(samples)
    }
}

impl<T: PredictionOracle + ?Sized> PredictionOracle for Box<T> {
    fn predict_batch(&self, samples: &[Sample]) -> Result<Vec<String>, OracleError> {
        (**self).predict_batch(samples)
    }
}

/// Wraps a pure labeling function.
pub struct FnOracle<F>(pub F);

impl<F> PredictionOracle for FnOracle<F>
where
    F: Fn(&Sample) -> String + Send + Sync,
{
    fn predict_batch(&self, samples: &[Sample]) -> Result<Vec<String>, OracleError> {
        Ok(samples.iter().map(&self.0).collect())
    }
}

//! Datasets, schemas, and identity-term lexicons.
//!
//! Structured rows are stored as `Vec<f64>`: continuous features hold their
//! value, categorical features hold the index of their value in the schema's
//! value list. The schema is needed to turn a row back into names.

mod binning;
mod lexicon;
mod schema;
mod structured;
mod text;

pub use binning::{make_binning, Binning};
pub use lexicon::{Lexicon, TermId, TermMatch};
pub use schema::{FeatureKind, FeatureSchema, FeatureSpec};
pub use structured::{load_structured, write_structured, Origin, StructuredDataset};
pub use text::{load_text, tokenize, write_text, Document, TextDataset};

/// A model input: either a structured feature vector or a token sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum Sample {
    Features(Vec<f64>),
    Tokens(Vec<String>),
}

impl Sample {
    pub fn features(&self) -> Option<&[f64]> {
        match self {
            Sample::Features(f) => Some(f),
            Sample::Tokens(_) => None,
        }
    }

    pub fn tokens(&self) -> Option<&[String]> {
        match self {
            Sample::Tokens(t) => Some(t),
            Sample::Features(_) => None,
        }
    }
}

/// Formats a number without trailing zeros, rounded to 10 decimals.
pub(crate) fn fmt_num(v: f64) -> String {
    let rounded = (v * 1e10).round() / 1e10;
    if rounded == rounded.trunc() && rounded.abs() < 1e15 {
        format!("{}", rounded as i64)
    } else {
        format!("{rounded}")
    }
}

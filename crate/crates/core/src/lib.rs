//! Black-box auditing of classifiers for subgroup discrimination.
//!
//! The pipeline has three phases:
//!
//! 1. [`rules`] mines frequent rule sets over the sensitive features of a
//!    dataset (value subsets, binned age-style intervals, identity terms).
//! 2. [`scorer`] estimates the group fairness score of every frequent rule set
//!    by paired sampling ([`sampler`]) against a [`oracle::PredictionOracle`],
//!    stopping once the composed margin of error drops below a threshold.
//! 3. [`mitigation`] optionally retrains a built-in network on counter-labeled
//!    samples for the worst finding.
//!
//! [`audit`] wires the phases together and renders reports.

pub mod audit;
pub mod data;
pub mod error;
pub mod mitigation;
pub mod oracle;
pub mod rules;
pub mod sampler;
pub mod scorer;

mod seed;

pub use error::{Error, Result};

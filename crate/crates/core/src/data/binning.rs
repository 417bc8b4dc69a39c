use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSpec};
use crate::error::{Error, Result};

/// Equal-width partition of a continuous feature's declared range.
///
/// Bins are half-open `[edges[i], edges[i + 1])` except the last one, which is
/// closed at the maximum so every in-domain value lands in exactly one bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub feature: String,
    pub edges: Vec<f64>,
}

pub fn make_binning(spec: &FeatureSpec, k: usize) -> Result<Binning> {
    let (min, max) = match spec.kind {
        FeatureKind::Continuous { min, max, .. } => (min, max),
        FeatureKind::Categorical { .. } => {
            return Err(Error::Rule(format!(
                "cannot bin categorical feature `{}`",
                spec.name
            )))
        }
    };
    if k < 2 {
        return Err(Error::Config(format!("bin count must be at least 2, got {k}")));
    }
    let span = max - min;
    let mut edges: Vec<f64> = (0..=k).map(|i| min + span * (i as f64) / (k as f64)).collect();
    edges[k] = max;
    Ok(Binning {
        feature: spec.name.clone(),
        edges,
    })
}

impl Binning {
    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn min(&self) -> f64 {
        self.edges[0]
    }

    pub fn max(&self) -> f64 {
        self.edges[self.bins()]
    }

    /// Index of the bin holding `v`. Values outside the range clamp to the end bins.
    pub fn bin_index(&self, v: f64) -> usize {
        let k = self.bins();
        // Largest i in [0, k-1] with edges[i] <= v.
        let upper = self.edges[1..k].partition_point(|&e| e <= v);
        upper.min(k - 1)
    }

    /// Lower bound of bin `first` and upper bound of bin `last`.
    pub fn span(&self, first: usize, last: usize) -> (f64, f64) {
        (self.edges[first], self.edges[last + 1])
    }
}

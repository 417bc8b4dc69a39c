use serde::{Deserialize, Serialize};

use crate::data::{make_binning, Binning, FeatureKind, FeatureSchema, FeatureSpec, Lexicon};
use crate::error::{Error, Result};
use crate::rules::Rule;

/// How continuous sensitive features become rules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMode {
    /// One rule per bin.
    SingleBin,
    /// One rule per contiguous run of bins, except the full range.
    #[default]
    Union,
}

/// Default cap on rules generated for a single feature.
pub const DEFAULT_MAX_RULES_PER_FEATURE: usize = 4096;

/// All 1-feature rules for a sensitive feature.
///
/// Categorical: every non-empty proper subset of the values (`2^n - 2` rules).
/// Continuous: every bin (single-bin mode) or every contiguous bin run other
/// than the full range (union mode, `K(K+1)/2 - 1` rules).
pub fn single_feature_rules(
    spec: &FeatureSpec,
    binning: Option<&Binning>,
    mode: IntervalMode,
) -> Result<Vec<Rule>> {
    if !spec.sensitive {
        return Err(Error::Rule(format!("feature `{}` is not sensitive", spec.name)));
    }
    match &spec.kind {
        FeatureKind::Categorical { values } => {
            let n = values.len();
            if n >= 64 {
                return Err(Error::TooManyRules {
                    feature: spec.name.clone(),
                    count: (1u128 << n.min(127)) - 2,
                    cap: DEFAULT_MAX_RULES_PER_FEATURE,
                });
            }
            let full = (1u64 << n) - 1;
            Ok((1..full)
                .map(|mask| Rule::Categorical {
                    feature: spec.name.clone(),
                    values: (0..n)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| values[i].clone())
                        .collect(),
                })
                .collect())
        }
        FeatureKind::Continuous { .. } => {
            let binning = binning
                .ok_or_else(|| Error::Rule(format!("continuous feature `{}` needs a binning", spec.name)))?;
            let k = binning.bins();
            let make = |first: usize, last: usize| {
                let (lo, hi) = binning.span(first, last);
                Rule::Interval {
                    feature: spec.name.clone(),
                    lo,
                    hi,
                    first,
                    last,
                    bins: k,
                }
            };
            Ok(match mode {
                IntervalMode::SingleBin => (0..k).map(|i| make(i, i)).collect(),
                IntervalMode::Union => (0..k)
                    .flat_map(|a| (a..k).map(move |b| (a, b)))
                    .filter(|&(a, b)| !(a == 0 && b == k - 1))
                    .map(|(a, b)| make(a, b))
                    .collect(),
            })
        }
    }
}

/// One rule per term of a lexicon category.
pub fn term_rules(lexicon: &Lexicon, category: usize) -> Vec<Rule> {
    let name = lexicon.category_name(category);
    lexicon
        .terms(category)
        .iter()
        .map(|t| Rule::Term {
            category: name.to_string(),
            term: t.clone(),
        })
        .collect()
}

/// Rules for one feature or category. A rule set picks at most one rule per group.
#[derive(Clone, Debug)]
pub struct RuleGroup {
    pub key: String,
    pub rules: Vec<Rule>,
}

/// The candidate rules of an audit, grouped by feature or category in schema
/// (or lexicon) order.
#[derive(Clone, Debug)]
pub struct RuleSpace {
    pub groups: Vec<RuleGroup>,
}

impl RuleSpace {
    pub fn structured(
        schema: &FeatureSchema,
        bins: usize,
        mode: IntervalMode,
        max_rules_per_feature: usize,
    ) -> Result<Self> {
        let mut groups = Vec::new();
        for (_, spec) in schema.sensitive() {
            let count = expected_rule_count(spec, bins, mode);
            if count > max_rules_per_feature as u128 {
                return Err(Error::TooManyRules {
                    feature: spec.name.clone(),
                    count,
                    cap: max_rules_per_feature,
                });
            }
            let binning = if spec.is_continuous() {
                Some(make_binning(spec, bins)?)
            } else {
                None
            };
            groups.push(RuleGroup {
                key: spec.name.clone(),
                rules: single_feature_rules(spec, binning.as_ref(), mode)?,
            });
        }
        if groups.is_empty() {
            return Err(Error::NoSensitiveFeatures);
        }
        Ok(RuleSpace { groups })
    }

    pub fn text(lexicon: &Lexicon) -> Result<Self> {
        let groups: Vec<_> = (0..lexicon.category_count())
            .map(|c| RuleGroup {
                key: lexicon.category_name(c).to_string(),
                rules: term_rules(lexicon, c),
            })
            .collect();
        if groups.is_empty() {
            return Err(Error::NoSensitiveFeatures);
        }
        Ok(RuleSpace { groups })
    }

    /// Number of non-empty rule sets with at most one rule per group.
    pub fn candidate_count(&self) -> u128 {
        self.groups
            .iter()
            .map(|g| g.rules.len() as u128 + 1)
            .product::<u128>()
            - 1
    }

    pub fn rule_count(&self) -> usize {
        self.groups.iter().map(|g| g.rules.len()).sum()
    }
}

fn expected_rule_count(spec: &FeatureSpec, k: usize, mode: IntervalMode) -> u128 {
    match &spec.kind {
        FeatureKind::Categorical { values } => {
            let n = values.len().min(127) as u32;
            2u128.pow(n) - 2
        }
        FeatureKind::Continuous { .. } => match mode {
            IntervalMode::SingleBin => k as u128,
            IntervalMode::Union => (k * (k + 1) / 2) as u128 - 1,
        },
    }
}

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{fmt_num, FeatureKind, FeatureSchema, Lexicon, TermId};
use crate::error::{Error, Result};

/// One interpretable constraint on a single sensitive feature or term category.
///
/// Rules refer to features and values by name so they serialize on their own.
/// Evaluation goes through [`CompiledRule`], resolved against a schema or lexicon.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// Feature value is one of `values` (in schema order).
    Categorical { feature: String, values: Vec<String> },
    /// Feature falls in bins `first..=last` of `bins` equal-width bins, i.e.
    /// `lo <= v < hi`, or `lo <= v <= hi` when `last` is the final bin.
    Interval {
        feature: String,
        lo: f64,
        hi: f64,
        first: usize,
        last: usize,
        bins: usize,
    },
    /// Document contains `term` (a member of `category`).
    Term { category: String, term: String },
}

impl Rule {
    /// The feature or category this rule constrains.
    pub fn key(&self) -> &str {
        match self {
            Rule::Categorical { feature, .. } | Rule::Interval { feature, .. } => feature,
            Rule::Term { category, .. } => category,
        }
    }

    fn variant_rank(&self) -> u8 {
        match self {
            Rule::Categorical { .. } => 0,
            Rule::Interval { .. } => 1,
            Rule::Term { .. } => 2,
        }
    }
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rule {}

impl PartialOrd for Rule {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic: key, then variant, then payload. Interval bounds are derived
/// from the bin indices, so only the indices take part.
impl Ord for Rule {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key()
            .cmp(other.key())
            .then(self.variant_rank().cmp(&other.variant_rank()))
            .then_with(|| match (self, other) {
                (Rule::Categorical { values: a, .. }, Rule::Categorical { values: b, .. }) => a.cmp(b),
                (
                    Rule::Interval {
                        first: f1,
                        last: l1,
                        bins: k1,
                        ..
                    },
                    Rule::Interval {
                        first: f2,
                        last: l2,
                        bins: k2,
                        ..
                    },
                ) => (f1, l1, k1).cmp(&(f2, l2, k2)),
                (Rule::Term { term: a, .. }, Rule::Term { term: b, .. }) => a.cmp(b),
                _ => Ordering::Equal,
            })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Categorical { feature, values } => {
                write!(f, "{feature}={}", values.join(" or "))
            }
            Rule::Interval {
                feature,
                lo,
                hi,
                first,
                last,
                bins,
            } => {
                let top = *last + 1 == *bins;
                match (*first == 0, top) {
                    (true, false) => write!(f, "{feature}<{}", fmt_num(*hi)),
                    (false, true) => write!(f, "{feature}≥{}", fmt_num(*lo)),
                    // (true, true) is the full range and never generated.
                    (true, true) => write!(f, "{}≤{feature}≤{}", fmt_num(*lo), fmt_num(*hi)),
                    (false, false) => write!(f, "{}≤{feature}<{}", fmt_num(*lo), fmt_num(*hi)),
                }
            }
            Rule::Term { term, .. } => write!(f, "\"{term}\""),
        }
    }
}

/// A conjunction of rules, at most one per feature or category.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    /// Keeps the given order, which is the display order.
    pub fn new(rules: Vec<Rule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Rule("a rule set needs at least one rule".into()));
        }
        for (i, r) in rules.iter().enumerate() {
            if rules[..i].iter().any(|o| o.key() == r.key()) {
                return Err(Error::Rule(format!(
                    "two rules constrain `{}` in one rule set",
                    r.key()
                )));
            }
        }
        Ok(RuleSet { rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Stable 64-bit identity used to derive sampling streams.
    pub fn fingerprint(&self) -> u64 {
        crate::seed::fnv1a(self.to_string().as_bytes())
    }

    pub fn compile(&self, schema: &FeatureSchema) -> Result<CompiledRuleSet> {
        Ok(CompiledRuleSet {
            rules: self
                .rules
                .iter()
                .map(|r| CompiledRule::for_schema(r, schema))
                .collect::<Result<_>>()?,
        })
    }

    pub fn compile_text(&self, lexicon: &Lexicon) -> Result<CompiledTermSet> {
        let terms = self
            .rules
            .iter()
            .map(|r| resolve_term(r, lexicon))
            .collect::<Result<_>>()?;
        Ok(CompiledTermSet { terms })
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rules.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧ ")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

/// A rule resolved against a schema: feature index plus a direct membership test.
#[derive(Clone, Debug)]
pub enum CompiledRule {
    Categorical {
        feature: usize,
        allowed: Vec<bool>,
    },
    Interval {
        feature: usize,
        lo: f64,
        hi: f64,
        closed: bool,
    },
}

impl CompiledRule {
    pub fn for_schema(rule: &Rule, schema: &FeatureSchema) -> Result<Self> {
        let key = rule.key();
        let index = schema
            .feature_index(key)
            .ok_or_else(|| Error::Rule(format!("unknown feature `{key}`")))?;
        let spec = &schema.features[index];
        if !spec.sensitive {
            return Err(Error::Rule(format!("feature `{key}` is not sensitive")));
        }
        match (rule, &spec.kind) {
            (Rule::Categorical { values, .. }, FeatureKind::Categorical { values: domain }) => {
                let mut allowed = vec![false; domain.len()];
                for v in values {
                    let i = domain
                        .iter()
                        .position(|d| d == v)
                        .ok_or_else(|| Error::Rule(format!("`{v}` is not a value of `{key}`")))?;
                    allowed[i] = true;
                }
                let count = allowed.iter().filter(|&&a| a).count();
                if count == 0 || count == domain.len() {
                    return Err(Error::Rule(format!(
                        "rule on `{key}` must select a non-empty proper subset of its values"
                    )));
                }
                Ok(CompiledRule::Categorical {
                    feature: index,
                    allowed,
                })
            }
            (
                Rule::Interval {
                    lo,
                    hi,
                    first,
                    last,
                    bins,
                    ..
                },
                FeatureKind::Continuous { .. },
            ) => {
                if *bins < 2 || first > last || *last >= *bins {
                    return Err(Error::Rule(format!(
                        "bad bin range {first}..={last} of {bins} on `{key}`"
                    )));
                }
                if *first == 0 && *last + 1 == *bins {
                    return Err(Error::Rule(format!("interval on `{key}` covers the full range")));
                }
                Ok(CompiledRule::Interval {
                    feature: index,
                    lo: *lo,
                    hi: *hi,
                    closed: *last + 1 == *bins,
                })
            }
            _ => Err(Error::Rule(format!(
                "rule kind does not match the kind of feature `{key}`"
            ))),
        }
    }

    pub fn feature(&self) -> usize {
        match self {
            CompiledRule::Categorical { feature, .. } | CompiledRule::Interval { feature, .. } => *feature,
        }
    }

    #[inline]
    pub fn matches(&self, row: &[f64]) -> bool {
        match self {
            CompiledRule::Categorical { feature, allowed } => {
                allowed.get(row[*feature] as usize).copied().unwrap_or(false)
            }
            CompiledRule::Interval {
                feature,
                lo,
                hi,
                closed,
            } => {
                let v = row[*feature];
                v >= *lo && (v < *hi || (*closed && v <= *hi))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledRuleSet {
    rules: Vec<CompiledRule>,
}

impl CompiledRuleSet {
    pub fn rules(&self) -> &[CompiledRule] {
        &self.rules
    }

    #[inline]
    pub fn matches(&self, row: &[f64]) -> bool {
        self.rules.iter().all(|r| r.matches(row))
    }
}

fn resolve_term(rule: &Rule, lexicon: &Lexicon) -> Result<TermId> {
    match rule {
        Rule::Term { category, term } => {
            let id = lexicon
                .lookup(term)
                .ok_or_else(|| Error::Rule(format!("`{term}` is not a lexicon term")))?;
            if lexicon.category_name(id.category) != category {
                return Err(Error::Rule(format!(
                    "`{term}` belongs to `{}`, not `{category}`",
                    lexicon.category_name(id.category)
                )));
            }
            Ok(id)
        }
        _ => Err(Error::Rule(format!(
            "rule on `{}` is not a term rule",
            rule.key()
        ))),
    }
}

/// Term rules resolved against a lexicon.
#[derive(Clone, Debug)]
pub struct CompiledTermSet {
    terms: Vec<TermId>,
}

impl CompiledTermSet {
    pub fn terms(&self) -> &[TermId] {
        &self.terms
    }

    /// Category-level containment: every rule's category is present. This is
    /// what support and group membership use.
    pub fn matches_categories(&self, doc: &crate::data::Document) -> bool {
        self.terms.iter().all(|t| doc.has_category(t.category))
    }

    /// Exact containment: every rule's own term is present.
    pub fn matches_terms(&self, doc: &crate::data::Document) -> bool {
        self.terms.iter().all(|&t| doc.has_term(t))
    }
}

/// Evaluates one rule against one structured row.
pub fn satisfies(schema: &FeatureSchema, row: &[f64], rule: &Rule) -> Result<bool> {
    let compiled = CompiledRule::for_schema(rule, schema)?;
    if compiled.feature() >= row.len() {
        return Err(Error::Rule(format!("sample has no value for `{}`", rule.key())));
    }
    Ok(compiled.matches(row))
}

/// Category-level containment for a document: true if it contains any term of
/// the rule's category.
pub fn satisfies_category(lexicon: &Lexicon, doc: &crate::data::Document, rule: &Rule) -> Result<bool> {
    let id = resolve_term(rule, lexicon)?;
    Ok(doc.has_category(id.category))
}

/// Exact containment of the rule's own term.
pub fn contains_term(lexicon: &Lexicon, doc: &crate::data::Document, rule: &Rule) -> Result<bool> {
    let id = resolve_term(rule, lexicon)?;
    Ok(doc.has_term(id))
}

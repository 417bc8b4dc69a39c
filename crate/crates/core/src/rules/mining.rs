use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{StructuredDataset, TextDataset};
use crate::error::{Error, Result};
use crate::rules::{CompiledRule, Rule, RuleSet, RuleSpace};

/// Fixed-length bit set over dataset rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowMask {
    words: Vec<u64>,
    len: usize,
}

impl RowMask {
    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut words = vec![0u64; len.div_ceil(64)];
        for i in 0..len {
            if f(i) {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        RowMask { words, len }
    }

    pub fn full(len: usize) -> Self {
        RowMask::from_fn(len, |_| true)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and(&self, other: &RowMask) -> RowMask {
        RowMask {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
            len: self.len,
        }
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }
}

/// A dataset that rules can be evaluated against, row by row.
pub trait Population {
    fn size(&self) -> usize;

    /// Rows satisfying `rule`. For text this is category-level containment.
    fn rule_mask(&self, rule: &Rule) -> Result<RowMask>;
}

impl Population for StructuredDataset {
    fn size(&self) -> usize {
        self.len()
    }

    fn rule_mask(&self, rule: &Rule) -> Result<RowMask> {
        let compiled = CompiledRule::for_schema(rule, &self.schema)?;
        Ok(RowMask::from_fn(self.len(), |i| compiled.matches(&self.rows[i])))
    }
}

impl Population for TextDataset {
    fn size(&self) -> usize {
        self.len()
    }

    fn rule_mask(&self, rule: &Rule) -> Result<RowMask> {
        let (category, term) = match rule {
            Rule::Term { category, term } => (category, term),
            _ => return Err(Error::Rule(format!("`{rule}` is not a term rule"))),
        };
        let id = self
            .lexicon
            .lookup(term)
            .filter(|id| self.lexicon.category_name(id.category) == category)
            .ok_or_else(|| Error::Rule(format!("`{term}` is not a `{category}` term")))?;
        Ok(RowMask::from_fn(self.len(), |i| {
            self.documents[i].has_category(id.category)
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportResult {
    pub rule_set: RuleSet,
    pub support: f64,
    pub satisfying: usize,
    pub total: usize,
}

impl SupportResult {
    fn new(rule_set: RuleSet, satisfying: usize, total: usize) -> Self {
        SupportResult {
            rule_set,
            support: satisfying as f64 / total as f64,
            satisfying,
            total,
        }
    }
}

/// Exact fraction of rows satisfying every rule of the set.
pub fn support<P: Population + ?Sized>(population: &P, rule_set: &RuleSet) -> Result<SupportResult> {
    let n = population.size();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut mask = RowMask::full(n);
    for rule in rule_set.rules() {
        mask = mask.and(&population.rule_mask(rule)?);
    }
    Ok(SupportResult::new(rule_set.clone(), mask.count(), n))
}

/// `count / total >= theta`, the frequency test shared by every enumeration path.
pub fn is_frequent(count: usize, total: usize, theta: f64) -> bool {
    count as f64 / total as f64 >= theta
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MiningOutcome {
    /// Frequent rule sets with a non-empty complement, in canonical order.
    pub frequent: Vec<SupportResult>,
    /// Rule sets whose support was computed.
    pub evaluated: usize,
    /// Frequent rule sets dropped because every row satisfies them.
    pub skipped_empty_complement: usize,
}

/// Enumerates rule sets (at most one rule per group) with support at least
/// `theta`, depth-first with anti-monotone pruning: an infrequent rule set is
/// never extended, since no superset can be frequent.
pub fn frequent_rule_sets<P: Population + ?Sized>(
    population: &P,
    space: &RuleSpace,
    theta: f64,
    max_rules_per_set: Option<usize>,
) -> Result<MiningOutcome> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Config(format!(
            "support threshold must be in (0, 1), got {theta}"
        )));
    }
    if space.groups.is_empty() {
        return Err(Error::NoSensitiveFeatures);
    }
    let n = population.size();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let masks: Vec<Vec<RowMask>> = space
        .groups
        .iter()
        .map(|g| g.rules.iter().map(|r| population.rule_mask(r)).collect())
        .collect::<Result<_>>()?;

    let mut search = Search {
        space,
        masks: &masks,
        n,
        theta,
        max_len: max_rules_per_set.unwrap_or(usize::MAX).max(1),
        chosen: Vec::new(),
        out: MiningOutcome::default(),
    };
    search.extend(0, &RowMask::full(n));

    let mut out = search.out;
    if out.skipped_empty_complement > 0 {
        warn!(
            "skipped {} frequent rule set(s) satisfied by every sample (empty complement)",
            out.skipped_empty_complement
        );
    }
    out.frequent.sort_by(|a, b| a.rule_set.cmp(&b.rule_set));
    Ok(out)
}

struct Search<'a> {
    space: &'a RuleSpace,
    masks: &'a [Vec<RowMask>],
    n: usize,
    theta: f64,
    max_len: usize,
    chosen: Vec<(usize, usize)>,
    out: MiningOutcome,
}

impl Search<'_> {
    fn extend(&mut self, from_group: usize, current: &RowMask) {
        if self.chosen.len() >= self.max_len {
            return;
        }
        for g in from_group..self.space.groups.len() {
            for r in 0..self.space.groups[g].rules.len() {
                let mask = current.and(&self.masks[g][r]);
                let count = mask.count();
                self.out.evaluated += 1;
                if !is_frequent(count, self.n, self.theta) {
                    continue;
                }
                self.chosen.push((g, r));
                if count == self.n {
                    self.out.skipped_empty_complement += 1;
                } else {
                    let rules = self
                        .chosen
                        .iter()
                        .map(|&(g, r)| self.space.groups[g].rules[r].clone())
                        .collect();
                    let rule_set = RuleSet::new(rules).expect("one rule per group");
                    self.out
                        .frequent
                        .push(SupportResult::new(rule_set, count, self.n));
                }
                self.extend(g + 1, &mask);
                self.chosen.pop();
            }
        }
    }
}

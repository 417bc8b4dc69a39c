//! Group-conditioned sample generation.
//!
//! Structured samples are dataset rows nudged on one non-sensitive numeric
//! feature; sensitive features are never touched, so group membership carries
//! over from the seed. Text samples for the in-group side rewrite identity
//! terms to the rule terms; complement-side text samples are unmodified
//! documents.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSpec, Sample, StructuredDataset, TextDataset};
use crate::error::{Error, Result};
use crate::rules::{CompiledRuleSet, CompiledTermSet, RuleSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Perturbation step for integer features.
    pub int_step: f64,
    /// Perturbation step for decimal features.
    pub dec_step: f64,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            int_step: 1.0,
            dec_step: 0.01,
            rng_seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.int_step > 0.0 && self.dec_step > 0.0) {
            return Err(Error::Config("perturbation steps must be positive".into()));
        }
        Ok(())
    }
}

/// Which side of a rule set a sample is drawn for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    InGroup,
    Complement,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::InGroup => "in_group",
            Side::Complement => "complement",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            Side::InGroup => 0,
            Side::Complement => 1,
        }
    }
}

/// Draws samples for one rule set. Implementations must consume `rng` in a
/// way that depends only on the draws made so far.
pub trait GroupSampler: Send + Sync {
    fn draw(&self, side: Side, rng: &mut ChaCha8Rng) -> Result<Sample>;
}

/// Moves `value` one step in direction `dir` and clamps to the feature range.
pub fn perturb_value(spec: &FeatureSpec, value: f64, dir: f64, config: &SamplerConfig) -> f64 {
    match spec.kind {
        FeatureKind::Continuous { min, max, integer } => {
            let step = if integer { config.int_step } else { config.dec_step };
            let v = (value + dir * step).clamp(min, max);
            if integer {
                v.round().clamp(min.ceil(), max.floor())
            } else {
                // Keeps 0.5 - 0.01 at 0.49 rather than 0.49000000000000005.
                ((v * 1e9).round() / 1e9).clamp(min, max)
            }
        }
        FeatureKind::Categorical { .. } => value,
    }
}

pub struct StructuredSampler<'a> {
    dataset: &'a StructuredDataset,
    config: SamplerConfig,
    in_group: Vec<usize>,
    complement: Vec<usize>,
    perturbable: Vec<usize>,
    description: String,
}

impl<'a> StructuredSampler<'a> {
    pub fn new(dataset: &'a StructuredDataset, rule_set: &RuleSet, config: &SamplerConfig) -> Result<Self> {
        let compiled: CompiledRuleSet = rule_set.compile(&dataset.schema)?;
        let (in_group, complement) = (0..dataset.len()).partition(|&i| compiled.matches(&dataset.rows[i]));
        let perturbable = dataset
            .schema
            .features
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.sensitive && f.is_continuous())
            .map(|(i, _)| i)
            .collect();
        Ok(StructuredSampler {
            dataset,
            config: config.clone(),
            in_group,
            complement,
            perturbable,
            description: rule_set.to_string(),
        })
    }

    /// Dataset rows on `side`, in row order.
    pub fn seeds(&self, side: Side) -> &[usize] {
        match side {
            Side::InGroup => &self.in_group,
            Side::Complement => &self.complement,
        }
    }

    /// Applies one random perturbation to a copy of `row`.
    pub fn perturb(&self, row: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = row.to_vec();
        if let Some(&k) = self.perturbable.choose(rng) {
            let dir = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            out[k] = perturb_value(&self.dataset.schema.features[k], row[k], dir, &self.config);
        }
        out
    }
}

impl GroupSampler for StructuredSampler<'_> {
    fn draw(&self, side: Side, rng: &mut ChaCha8Rng) -> Result<Sample> {
        let &seed = self.seeds(side).choose(rng).ok_or_else(|| Error::NoSeed {
            side: side.as_str(),
            rule_set: self.description.clone(),
        })?;
        Ok(Sample::Features(self.perturb(&self.dataset.rows[seed], rng)))
    }
}

pub struct TextSampler<'a> {
    dataset: &'a TextDataset,
    terms: CompiledTermSet,
    replacements: Vec<Option<Vec<String>>>,
    in_group: Vec<usize>,
    complement: Vec<usize>,
    description: String,
}

impl<'a> TextSampler<'a> {
    pub fn new(dataset: &'a TextDataset, rule_set: &RuleSet) -> Result<Self> {
        let terms = rule_set.compile_text(&dataset.lexicon)?;
        let mut replacements = vec![None; dataset.lexicon.category_count()];
        for &id in terms.terms() {
            let words = dataset.lexicon.term(id).split(' ').map(str::to_string).collect();
            replacements[id.category] = Some(words);
        }
        let (in_group, complement) =
            (0..dataset.len()).partition(|&i| terms.matches_categories(&dataset.documents[i]));
        Ok(TextSampler {
            dataset,
            terms,
            replacements,
            in_group,
            complement,
            description: rule_set.to_string(),
        })
    }

    pub fn seeds(&self, side: Side) -> &[usize] {
        match side {
            Side::InGroup => &self.in_group,
            Side::Complement => &self.complement,
        }
    }

    pub fn terms(&self) -> &CompiledTermSet {
        &self.terms
    }

    /// Rewrites every term of a rule category in document `doc` to the rule's term.
    pub fn rewrite(&self, doc: usize) -> Vec<String> {
        let doc = &self.dataset.documents[doc];
        let mut out = Vec::with_capacity(doc.tokens.len());
        let mut pos = 0;
        for m in doc.matches() {
            let Some(words) = &self.replacements[m.id.category] else {
                continue;
            };
            out.extend_from_slice(&doc.tokens[pos..m.start]);
            out.extend(words.iter().cloned());
            pos = m.start + m.len;
        }
        out.extend_from_slice(&doc.tokens[pos..]);
        out
    }
}

impl GroupSampler for TextSampler<'_> {
    fn draw(&self, side: Side, rng: &mut ChaCha8Rng) -> Result<Sample> {
        let &seed = self.seeds(side).choose(rng).ok_or_else(|| Error::NoSeed {
            side: side.as_str(),
            rule_set: self.description.clone(),
        })?;
        Ok(Sample::Tokens(match side {
            Side::InGroup => self.rewrite(seed),
            Side::Complement => self.dataset.documents[seed].tokens.clone(),
        }))
    }
}

/// One perturbed structured sample on `side` of `rule_set`.
pub fn sample_structured(
    dataset: &StructuredDataset,
    rule_set: &RuleSet,
    side: Side,
    config: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let sample = StructuredSampler::new(dataset, rule_set, config)?.draw(side, rng)?;
    match sample {
        Sample::Features(f) => Ok(f),
        Sample::Tokens(_) => unreachable!("structured sampler yields features"),
    }
}

/// One term-replaced document satisfying every rule term exactly.
pub fn sample_text(dataset: &TextDataset, rule_set: &RuleSet, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    text_draw(dataset, rule_set, Side::InGroup, rng)
}

/// One unmodified document outside the rule set's group.
pub fn sample_text_complement(
    dataset: &TextDataset,
    rule_set: &RuleSet,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>> {
    text_draw(dataset, rule_set, Side::Complement, rng)
}

fn text_draw(
    dataset: &TextDataset,
    rule_set: &RuleSet,
    side: Side,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>> {
    match TextSampler::new(dataset, rule_set)?.draw(side, rng)? {
        Sample::Tokens(t) => Ok(t),
        Sample::Features(_) => unreachable!("text sampler yields tokens"),
    }
}

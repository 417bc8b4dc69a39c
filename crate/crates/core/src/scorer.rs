//! Adaptive estimation of group fairness scores and ranking of findings.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::oracle::PredictionOracle;
use crate::rules::RuleSet;
use crate::sampler::{GroupSampler, Side};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    /// Minimum samples per side before the stopping check runs.
    pub sample_thr: usize,
    /// Stop once the composed margin of error is at most this.
    pub error_thr: f64,
    pub z: f64,
    /// Per-side confidence level matching `z`.
    pub confidence: f64,
    /// Hard cap on samples per side.
    pub max_samples: usize,
    pub rng_seed: u64,
    /// Sample pairs per oracle call after the first call.
    pub block_size: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            sample_thr: 1000,
            error_thr: 0.05,
            z: 1.96,
            confidence: 0.95,
            max_samples: 200_000,
            rng_seed: 0,
            block_size: 256,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.error_thr > 0.0 && self.error_thr < 1.0) {
            return bad(format!("error_thr must be in (0, 1), got {}", self.error_thr));
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return bad(format!("z must be positive, got {}", self.z));
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return bad(format!("confidence must be in (0, 1], got {}", self.confidence));
        }
        if self.sample_thr < 1 {
            return bad("sample_thr must be at least 1".into());
        }
        if self.max_samples < self.sample_thr {
            return bad(format!(
                "max_samples ({}) must be at least sample_thr ({})",
                self.max_samples, self.sample_thr
            ));
        }
        if self.block_size < 1 {
            return bad("block_size must be at least 1".into());
        }
        Ok(())
    }
}

/// Normal-approximation half-width `z * sqrt(phi (1 - phi) / num)`.
pub fn margin(phi: f64, num: usize, z: f64) -> f64 {
    z * (phi * (1.0 - phi) / num as f64).sqrt()
}

/// Point estimate and composed error bound from favorable counts on each side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub phi_r: f64,
    pub phi_not_r: f64,
    pub score: f64,
    pub epsilon_r: f64,
    pub epsilon_not_r: f64,
    pub epsilon: f64,
    /// Confidence of the composed bound: the per-side level squared.
    pub confidence: f64,
}

impl Estimate {
    pub fn from_counts(
        favorable_r: usize,
        favorable_not_r: usize,
        num: usize,
        z: f64,
        confidence: f64,
    ) -> Self {
        let phi_r = favorable_r as f64 / num as f64;
        let phi_not_r = favorable_not_r as f64 / num as f64;
        let epsilon_r = margin(phi_r, num, z);
        let epsilon_not_r = margin(phi_not_r, num, z);
        Estimate {
            phi_r,
            phi_not_r,
            score: (phi_r - phi_not_r).abs(),
            epsilon_r,
            epsilon_not_r,
            epsilon: epsilon_r + epsilon_not_r,
            confidence: confidence * confidence,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub rule_set: RuleSet,
    pub description: String,
    pub phi_r: f64,
    pub phi_not_r: f64,
    pub score: f64,
    pub epsilon_r: f64,
    pub epsilon_not_r: f64,
    pub epsilon: f64,
    pub confidence: f64,
    /// Samples drawn per side.
    pub num: usize,
    pub favorable_r: usize,
    pub favorable_not_r: usize,
    pub converged: bool,
}

impl FairnessReport {
    pub fn from_counts(
        rule_set: &RuleSet,
        favorable_r: usize,
        favorable_not_r: usize,
        num: usize,
        config: &ScorerConfig,
    ) -> Self {
        let e = Estimate::from_counts(favorable_r, favorable_not_r, num, config.z, config.confidence);
        FairnessReport {
            rule_set: rule_set.clone(),
            description: rule_set.to_string(),
            phi_r: e.phi_r,
            phi_not_r: e.phi_not_r,
            score: e.score,
            epsilon_r: e.epsilon_r,
            epsilon_not_r: e.epsilon_not_r,
            epsilon: e.epsilon,
            confidence: e.confidence,
            num,
            favorable_r,
            favorable_not_r,
            converged: num > config.sample_thr && e.epsilon <= config.error_thr,
        }
    }
}

/// Estimates `|P(favorable | R) - P(favorable | not R)|` by drawing one sample
/// per side per iteration until the margin of error is small enough.
///
/// Each side has its own random stream derived from the seed and the rule set,
/// so the result does not depend on `block_size` or on which thread runs it.
pub fn group_fairness_score<O, S>(
    oracle: &O,
    sampler: &S,
    rule_set: &RuleSet,
    favorable: &str,
    config: &ScorerConfig,
) -> Result<FairnessReport>
where
    O: PredictionOracle + ?Sized,
    S: GroupSampler + ?Sized,
{
    config.validate()?;
    let fp = rule_set.fingerprint();
    let mut rng_r = seed::stream(config.rng_seed, &[fp, Side::InGroup.index()]);
    let mut rng_not_r = seed::stream(config.rng_seed, &[fp, Side::Complement.index()]);
    let (mut num, mut fav_r, mut fav_not_r) = (0usize, 0usize, 0usize);

    loop {
        let want = if num == 0 {
            config.sample_thr + 1
        } else {
            config.block_size
        };
        let block = want.min(config.max_samples - num);
        let mut batch: Vec<Sample> = Vec::with_capacity(2 * block);
        for _ in 0..block {
            batch.push(sampler.draw(Side::InGroup, &mut rng_r)?);
        }
        for _ in 0..block {
            batch.push(sampler.draw(Side::Complement, &mut rng_not_r)?);
        }
        let labels = oracle.predict_batch(&batch).map_err(|source| Error::Scoring {
            rule_set: rule_set.to_string(),
            num,
            source,
        })?;
        if labels.len() != batch.len() {
            return Err(Error::Scoring {
                rule_set: rule_set.to_string(),
                num,
                source: crate::oracle::OracleError::Malformed {
                    line: String::new(),
                    reason: format!("{} labels for {} samples", labels.len(), batch.len()),
                },
            });
        }
        for i in 0..block {
            num += 1;
            fav_r += usize::from(labels[i] == favorable);
            fav_not_r += usize::from(labels[block + i] == favorable);
            let done = num == config.max_samples
                || (num > config.sample_thr
                    && Estimate::from_counts(fav_r, fav_not_r, num, config.z, config.confidence).epsilon
                        <= config.error_thr);
            if done {
                return Ok(FairnessReport::from_counts(
                    rule_set, fav_r, fav_not_r, num, config,
                ));
            }
        }
    }
}

/// Scores every rule set on a pool of `jobs` threads (0 = all cores). Output
/// order follows `rule_sets`.
pub fn score_rule_sets<O, S, F>(
    oracle: &O,
    rule_sets: &[RuleSet],
    make_sampler: F,
    favorable: &str,
    config: &ScorerConfig,
    jobs: usize,
) -> Result<Vec<FairnessReport>>
where
    O: PredictionOracle + ?Sized,
    S: GroupSampler,
    F: Fn(&RuleSet) -> Result<S> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        rule_sets
            .par_iter()
            .map(|rs| group_fairness_score(oracle, &make_sampler(rs)?, rs, favorable, config))
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFinding {
    /// 1-based position in the ranking.
    pub rank: usize,
    /// Score above the discrimination threshold.
    pub flagged: bool,
    #[serde(flatten)]
    pub report: FairnessReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub threshold: f64,
    pub top_k: usize,
    /// Every scored rule set, worst first.
    pub ranked: Vec<RankedFinding>,
}

impl Ranking {
    pub fn top(&self) -> &[RankedFinding] {
        &self.ranked[..self.top_k.min(self.ranked.len())]
    }

    pub fn flagged(&self) -> impl Iterator<Item = &RankedFinding> {
        self.ranked.iter().filter(|f| f.flagged)
    }
}

/// Sorts by score, highest first, with ties in canonical rule-set order, and
/// flags scores strictly above `threshold`.
pub fn rank_rule_sets(mut reports: Vec<FairnessReport>, threshold: f64, top_k: usize) -> Ranking {
    reports.sort_by(|a, b| match b.score.total_cmp(&a.score) {
        Ordering::Equal => a.rule_set.cmp(&b.rule_set),
        o => o,
    });
    Ranking {
        threshold,
        top_k,
        ranked: reports
            .into_iter()
            .enumerate()
            .map(|(i, report)| RankedFinding {
                rank: i + 1,
                flagged: report.score > threshold,
                report,
            })
            .collect(),
    }
}

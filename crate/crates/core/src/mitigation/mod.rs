//! Counter-sample augmentation and retraining for the worst finding.
//!
//! Counter samples are in-group samples that the *original* model already
//! predicts with the under-represented label, and they are labeled with that
//! prediction, not with any ground truth.

mod train;

use std::io::Write;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{write_structured, write_text, Origin, Sample, StructuredDataset, TextDataset};
use crate::error::{Error, Result};
use crate::oracle::{MlpModel, MlpOracle, PredictionOracle};
use crate::sampler::{GroupSampler, SamplerConfig, Side, StructuredSampler};
use crate::scorer::{group_fairness_score, FairnessReport, ScorerConfig};
use crate::seed;

pub use train::{accuracy, train_mlp, Optimizer, TrainOutcome, TrainerConfig};

/// Recorded in every summary: retraining always restarts from the audited
/// model's weights, never from a fresh initialization.
pub const RETRAIN_FROM: &str = "original_weights";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    /// Counter samples in the first round.
    pub start_count: usize,
    /// Upper bound on counter samples as a fraction of the dataset size.
    pub max_fraction: f64,
    /// Count multiplier between rounds.
    pub growth: f64,
    pub trainer: TrainerConfig,
    /// Largest tolerated held-out accuracy loss, as a fraction.
    pub accuracy_drop_budget: f64,
    /// Share of the dataset held out for accuracy measurement.
    pub holdout_fraction: f64,
    /// Sampling attempts allowed per requested counter sample.
    pub attempts_per_sample: usize,
    pub rng_seed: u64,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig {
            start_count: 50,
            max_fraction: 0.10,
            growth: 2.0,
            trainer: TrainerConfig::default(),
            accuracy_drop_budget: 0.02,
            holdout_fraction: 0.2,
            attempts_per_sample: 100,
            rng_seed: 0,
        }
    }
}

impl MitigationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.max_fraction > 0.0 && self.max_fraction <= 1.0) {
            return bad(format!(
                "max_fraction must be in (0, 1], got {}",
                self.max_fraction
            ));
        }
        if self.start_count < 1 {
            return bad("start_count must be at least 1".into());
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return bad(format!("growth must be above 1, got {}", self.growth));
        }
        if self.accuracy_drop_budget.is_nan() || self.accuracy_drop_budget < 0.0 {
            return bad("accuracy_drop_budget must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return bad(format!(
                "holdout_fraction must be in [0, 1), got {}",
                self.holdout_fraction
            ));
        }
        if self.attempts_per_sample < 1 {
            return bad("attempts_per_sample must be at least 1".into());
        }
        self.trainer.validate()
    }

    /// Most counter samples any round may add for a dataset of `n` rows.
    pub fn max_count(&self, n: usize) -> usize {
        (self.max_fraction * n as f64).floor() as usize
    }

    /// Round sizes: geometric from `start_count`, ending at the cap.
    pub fn schedule(&self, n: usize) -> Vec<usize> {
        let max = self.max_count(n);
        if max == 0 {
            return Vec::new();
        }
        let mut counts = Vec::new();
        let mut c = self.start_count;
        while c < max {
            counts.push(c);
            c = ((c as f64 * self.growth).ceil() as usize).max(c + 1);
        }
        counts.push(max);
        counts
    }
}

/// The label counter samples should carry: favorable when the group is
/// under-favored, otherwise the first other label.
pub fn target_label(report: &FairnessReport, labels: &[String], favorable: &str) -> Result<String> {
    if report.phi_r < report.phi_not_r {
        return Ok(favorable.to_string());
    }
    labels
        .iter()
        .find(|l| *l != favorable)
        .cloned()
        .ok_or_else(|| Error::Config("mitigation needs at least two labels".into()))
}

/// Draws in-group samples until `count` of them are predicted `target_label`.
pub fn generate_counter_samples<O, S>(
    oracle: &O,
    sampler: &S,
    target_label: &str,
    count: usize,
    max_attempts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Sample>>
where
    O: PredictionOracle + ?Sized,
    S: GroupSampler + ?Sized,
{
    let (kept, attempts) = collect_counter_samples(oracle, sampler, target_label, count, max_attempts, rng)?;
    if kept.len() < count {
        return Err(Error::CounterSampleBudget {
            found: kept.len(),
            requested: count,
            attempts,
        });
    }
    Ok(kept)
}

fn collect_counter_samples<O, S>(
    oracle: &O,
    sampler: &S,
    target_label: &str,
    count: usize,
    max_attempts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Sample>, usize)>
where
    O: PredictionOracle + ?Sized,
    S: GroupSampler + ?Sized,
{
    let mut kept = Vec::with_capacity(count);
    let mut attempts = 0;
    while kept.len() < count && attempts < max_attempts {
        let chunk = (2 * (count - kept.len())).max(64).min(max_attempts - attempts);
        let batch = (0..chunk)
            .map(|_| sampler.draw(Side::InGroup, rng))
            .collect::<Result<Vec<_>>>()?;
        attempts += chunk;
        let labels = oracle.predict_batch(&batch)?;
        for (sample, label) in batch.into_iter().zip(labels) {
            if label == target_label && kept.len() < count {
                kept.push(sample);
            }
        }
    }
    Ok((kept, attempts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub count: usize,
    pub score: f64,
    pub phi_r: f64,
    pub phi_not_r: f64,
    pub epsilon: f64,
    pub accuracy: f64,
    pub accuracy_drop: f64,
    pub within_budget: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationSummary {
    pub rule_set: String,
    pub target_label: String,
    pub retrain_from: String,
    pub before: FairnessReport,
    pub after: FairnessReport,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    /// Index into `rounds`; `None` when no round stayed within the accuracy budget
    /// or there was nothing to mitigate.
    pub chosen_round: Option<usize>,
    pub rounds: Vec<RoundReport>,
    pub holdout_rows: usize,
}

#[derive(Clone, Debug)]
pub struct MitigationOutcome {
    pub summary: MitigationSummary,
    /// The chosen retrained model, or the original one.
    pub model: MlpModel,
    /// Counter samples used by the chosen round.
    pub augmentation: Vec<Vec<f64>>,
    /// Label index (schema order) of every augmentation row.
    pub augmentation_label: usize,
}

/// Retrains `model` on growing counter-sample sets for the rule set of
/// `worst` and keeps the round with the lowest rescored fairness score whose
/// held-out accuracy drop is within budget.
pub fn mitigate(
    model: &MlpModel,
    dataset: &StructuredDataset,
    worst: &FairnessReport,
    scorer: &ScorerConfig,
    sampler_config: &SamplerConfig,
    config: &MitigationConfig,
) -> Result<MitigationOutcome> {
    config.validate()?;
    let schema = &dataset.schema;
    let favorable = schema.favorable_label.as_str();
    let rule_set = &worst.rule_set;
    let original = MlpOracle::new(model.clone(), schema)?;
    let sampler = StructuredSampler::new(dataset, rule_set, sampler_config)?;
    let before = group_fairness_score(&original, &sampler, rule_set, favorable, scorer)?;
    let target = target_label(&before, &schema.labels, favorable)?;
    let target_index = schema.label_index(&target).expect("target comes from the schema");

    // Dataset labels are schema indices; training targets are model indices.
    let to_model = |schema_label: usize| {
        let name = &schema.labels[schema_label];
        model
            .labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::Model(format!("model has no output for label `{name}`")))
    };

    let (train_rows, holdout_rows) = split(dataset.len(), config);
    let encode_rows = |rows: &[usize]| -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
        let x = rows.iter().map(|&i| original.encode(&dataset.rows[i])).collect();
        let y = rows
            .iter()
            .map(|&i| to_model(dataset.labels[i]))
            .collect::<Result<_>>()?;
        Ok((x, y))
    };
    let (train_x, train_y) = encode_rows(&train_rows)?;
    let (hold_x, hold_y) = encode_rows(&holdout_rows)?;
    let accuracy_before = accuracy(model, &hold_x, &hold_y)?;

    let mut summary = MitigationSummary {
        rule_set: rule_set.to_string(),
        target_label: target.clone(),
        retrain_from: RETRAIN_FROM.to_string(),
        after: before.clone(),
        before,
        accuracy_before,
        accuracy_after: accuracy_before,
        chosen_round: None,
        rounds: Vec::new(),
        holdout_rows: holdout_rows.len(),
    };
    let unchanged = |summary: MitigationSummary| MitigationOutcome {
        summary,
        model: model.clone(),
        augmentation: Vec::new(),
        augmentation_label: target_index,
    };
    if summary.before.score == 0.0 {
        info!("score of `{rule_set}` is already 0; nothing to mitigate");
        return Ok(unchanged(summary));
    }

    let schedule = config.schedule(dataset.len());
    let Some(&max_count) = schedule.last() else {
        warn!("dataset too small for any counter samples");
        return Ok(unchanged(summary));
    };
    let mut rng = seed::stream(config.rng_seed, &[rule_set.fingerprint(), 2]);
    let (pool, attempts) = collect_counter_samples(
        &original,
        &sampler,
        &target,
        max_count,
        max_count.saturating_mul(config.attempts_per_sample),
        &mut rng,
    )?;
    if pool.len() < max_count {
        warn!(
            "found {} of {max_count} counter samples in {attempts} attempts; later rounds reuse what was found",
            pool.len()
        );
    }
    let pool: Vec<Vec<f64>> = pool
        .into_iter()
        .map(|s| match s {
            Sample::Features(f) => f,
            Sample::Tokens(_) => unreachable!("structured sampler yields features"),
        })
        .collect();
    let target_model_index = to_model(target_index)?;

    let mut best: Option<(usize, MlpModel, FairnessReport, f64)> = None;
    let mut last_count = None;
    for &count in &schedule {
        let count = count.min(pool.len());
        if last_count == Some(count) {
            continue;
        }
        last_count = Some(count);
        let mut x = train_x.clone();
        let mut y = train_y.clone();
        x.extend(pool[..count].iter().map(|r| original.encode(r)));
        y.extend(std::iter::repeat_n(target_model_index, count));
        let trained = train_mlp(model, &x, &y, None, &config.trainer)?;
        let acc = accuracy(&trained.model, &hold_x, &hold_y)?;
        let oracle = MlpOracle::new(trained.model, schema)?;
        let after = group_fairness_score(&oracle, &sampler, rule_set, favorable, scorer)?;
        let drop = accuracy_before - acc;
        let within_budget = drop <= config.accuracy_drop_budget;
        info!(
            "round with {count} counter samples: score {:.4}, held-out accuracy {acc:.4}",
            after.score
        );
        summary.rounds.push(RoundReport {
            count,
            score: after.score,
            phi_r: after.phi_r,
            phi_not_r: after.phi_not_r,
            epsilon: after.epsilon,
            accuracy: acc,
            accuracy_drop: drop,
            within_budget,
        });
        let better = best.as_ref().is_none_or(|(_, _, b, _)| after.score < b.score);
        if within_budget && better {
            best = Some((summary.rounds.len() - 1, oracle.into_model(), after, acc));
        }
    }

    match best {
        Some((round, chosen, after, acc)) => {
            let count = summary.rounds[round].count;
            summary.chosen_round = Some(round);
            summary.after = after;
            summary.accuracy_after = acc;
            Ok(MitigationOutcome {
                summary,
                model: chosen,
                augmentation: pool[..count].to_vec(),
                augmentation_label: target_index,
            })
        }
        None => {
            warn!("no mitigation round kept the accuracy drop within budget; keeping the original model");
            Ok(unchanged(summary))
        }
    }
}

/// Deterministic train/holdout split of `0..n`. With no holdout, accuracy is
/// measured on the training rows.
fn split(n: usize, config: &MitigationConfig) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed::derive(
        config.rng_seed,
        &[3],
    )));
    let h = (config.holdout_fraction * n as f64).floor() as usize;
    if h == 0 {
        return (idx.clone(), idx);
    }
    let train = idx.split_off(h);
    (train, idx)
}

/// Counter samples for an oracle that cannot be retrained here: up to the
/// configured cap, labeled with the target label.
pub fn augmentation_samples<O, S>(
    oracle: &O,
    sampler: &S,
    worst: &FairnessReport,
    labels: &[String],
    favorable: &str,
    dataset_len: usize,
    config: &MitigationConfig,
) -> Result<(String, Vec<Sample>)>
where
    O: PredictionOracle + ?Sized,
    S: GroupSampler + ?Sized,
{
    config.validate()?;
    let target = target_label(worst, labels, favorable)?;
    let count = config.max_count(dataset_len);
    let mut rng = seed::stream(config.rng_seed, &[worst.rule_set.fingerprint(), 2]);
    let (kept, attempts) = collect_counter_samples(
        oracle,
        sampler,
        &target,
        count,
        count.saturating_mul(config.attempts_per_sample),
        &mut rng,
    )?;
    if kept.len() < count {
        warn!(
            "found {} of {count} counter samples in {attempts} attempts",
            kept.len()
        );
    }
    Ok((target, kept))
}

/// Original rows followed by augmentation rows, with an `origin` column.
pub fn write_augmented_structured<W: Write>(
    writer: W,
    dataset: &StructuredDataset,
    augmentation: &[Vec<f64>],
    label: usize,
) -> Result<()> {
    let mut rows = dataset.rows.clone();
    rows.extend(augmentation.iter().cloned());
    let mut labels = dataset.labels.clone();
    labels.extend(std::iter::repeat_n(label, augmentation.len()));
    let mut origins = vec![Origin::Original; dataset.len()];
    origins.extend(std::iter::repeat_n(Origin::Augmented, augmentation.len()));
    let combined = StructuredDataset::new(dataset.schema.clone(), rows, labels)?;
    write_structured(writer, &combined, Some(&origins))
}

/// Original documents followed by augmentation documents, with an origin column.
pub fn write_augmented_text<W: Write>(
    writer: W,
    dataset: &TextDataset,
    augmentation: &[Vec<String>],
    label: &str,
) -> Result<()> {
    let mut docs: Vec<(Vec<String>, String)> = dataset
        .documents
        .iter()
        .map(|d| (d.tokens.clone(), d.label.clone()))
        .collect();
    docs.extend(augmentation.iter().map(|t| (t.clone(), label.to_string())));
    let mut origins = vec![Origin::Original; dataset.len()];
    origins.extend(std::iter::repeat_n(Origin::Augmented, augmentation.len()));
    write_text(writer, &docs, Some(&origins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnOracle;
    use crate::rules::RuleSet;

    fn report(phi_r: f64, phi_not_r: f64) -> FairnessReport {
        let rs = RuleSet::new(vec![crate::rules::Rule::Categorical {
            feature: "g".into(),
            values: vec!["a".into()],
        }])
        .unwrap();
        let mut r = FairnessReport::from_counts(&rs, 0, 0, 1, &ScorerConfig::default());
        r.phi_r = phi_r;
        r.phi_not_r = phi_not_r;
        r
    }

    struct Coin;

    impl GroupSampler for Coin {
        fn draw(&self, _: Side, rng: &mut ChaCha8Rng) -> Result<Sample> {
            use rand::Rng;
            Ok(Sample::Features(vec![rng.gen::<f64>()]))
        }
    }

    #[test]
    fn schedule_is_geometric_and_capped() {
        let c = MitigationConfig::default();
        assert_eq!(c.schedule(5000), vec![50, 100, 200, 400, 500]);
        assert_eq!(c.schedule(1000), vec![50, 100]);
        assert_eq!(c.schedule(300), vec![30]);
        assert!(c.schedule(5).is_empty());
        for n in [10, 777, 12345] {
            assert!(c.schedule(n).iter().all(|&k| k <= c.max_count(n)));
        }
    }

    #[test]
    fn target_label_direction() {
        let labels = vec!["0".to_string(), "1".to_string()];
        assert_eq!(target_label(&report(0.2, 0.5), &labels, "1").unwrap(), "1");
        assert_eq!(target_label(&report(0.6, 0.1), &labels, "1").unwrap(), "0");
    }

    #[test]
    fn counter_samples_all_carry_target() {
        let oracle = FnOracle(|s: &Sample| usize::from(s.features().unwrap()[0] < 0.5).to_string());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kept = generate_counter_samples(&oracle, &Coin, "1", 50, 10_000, &mut rng).unwrap();
        assert_eq!(kept.len(), 50);
        assert!(kept.iter().all(|s| s.features().unwrap()[0] < 0.5));
    }

    #[test]
    fn impossible_target_exhausts_budget() {
        let oracle = FnOracle(|_: &Sample| "0".to_string());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = generate_counter_samples(&oracle, &Coin, "1", 10, 500, &mut rng).unwrap_err();
        assert!(matches!(
            err,
            Error::CounterSampleBudget {
                found: 0,
                requested: 10,
                attempts: 500
            }
        ));
    }

    #[test]
    fn acceptance_rate_tracks_oracle_rate() {
        let oracle = FnOracle(|s: &Sample| usize::from(s.features().unwrap()[0] < 0.207).to_string());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (kept, attempts) =
            collect_counter_samples(&oracle, &Coin, "1", 2000, 1_000_000, &mut rng).unwrap();
        let rate = kept.len() as f64 / attempts as f64;
        assert!((rate - 0.207).abs() < 0.02, "{rate}");
    }

    #[test]
    fn split_is_disjoint() {
        let (train, hold) = split(100, &MitigationConfig::default());
        assert_eq!((train.len(), hold.len()), (80, 20));
        let mut all: Vec<usize> = train.iter().chain(&hold).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }
}

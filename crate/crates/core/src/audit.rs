//! Audit orchestration: configuration, the mine, score, rank and mitigate
//! pipeline, and report rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use serde::{Deserialize, Serialize};

use crate::data::{
    load_structured, load_text, FeatureSchema, Lexicon, Sample, StructuredDataset, TextDataset,
};
use crate::error::{Error, Result};
use crate::mitigation::{
    augmentation_samples, mitigate, write_augmented_structured, write_augmented_text, MitigationConfig,
    MitigationSummary,
};
use crate::oracle::{MlpModel, MlpOracle, PredictionOracle, SubprocessOracle};
use crate::rules::{
    frequent_rule_sets, IntervalMode, MiningOutcome, RuleSet, RuleSpace, DEFAULT_MAX_RULES_PER_FEATURE,
};
use crate::sampler::{GroupSampler, SamplerConfig, Side, StructuredSampler, TextSampler};
use crate::scorer::{rank_rule_sets, score_rule_sets, Ranking, ScorerConfig};

/// Environment variable naming the default lexicon file for text audits.
pub const LEXICON_ENV: &str = "FAIRSUB_LEXICON";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Structured {
        path: PathBuf,
        schema: PathBuf,
    },
    Text {
        path: PathBuf,
        /// Falls back to `$FAIRSUB_LEXICON`, then to the built-in lexicon.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lexicon: Option<PathBuf>,
        favorable_label: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    Mlp {
        path: PathBuf,
    },
    Subprocess {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

fn default_timeout() -> f64 {
    60.0
}

/// Everything about an audit except where the data and model come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSettings {
    /// Minimum support of a rule set.
    pub theta: f64,
    /// Equal-width bins per continuous sensitive feature.
    pub bins: usize,
    pub interval_mode: IntervalMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rules_per_set: Option<usize>,
    pub max_rules_per_feature: usize,
    /// Scores above this are flagged as discrimination.
    pub threshold: f64,
    pub top_k: usize,
    /// Scoring threads; 0 uses every core.
    pub jobs: usize,
    pub scorer: ScorerConfig,
    pub sampler: SamplerConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mitigation: Option<MitigationConfig>,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            theta: 0.05,
            bins: 10,
            interval_mode: IntervalMode::Union,
            max_rules_per_set: None,
            max_rules_per_feature: DEFAULT_MAX_RULES_PER_FEATURE,
            threshold: 0.05,
            top_k: 3,
            jobs: 0,
            scorer: ScorerConfig::default(),
            sampler: SamplerConfig::default(),
            mitigation: None,
        }
    }
}

impl AuditSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!(
                "theta must be in (0, 1), got {}",
                self.theta
            )));
        }
        if self.bins < 2 {
            return Err(Error::Config(format!(
                "bins must be at least 2, got {}",
                self.bins
            )));
        }
        if !(self.threshold >= 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold must be in [0, 1), got {}",
                self.threshold
            )));
        }
        if self.max_rules_per_set == Some(0) {
            return Err(Error::Config("max_rules_per_set must be at least 1".into()));
        }
        self.scorer.validate()?;
        self.sampler.validate()?;
        if let Some(m) = &self.mitigation {
            m.validate()?;
        }
        Ok(())
    }
}

/// A complete audit description, as read from a JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawConfig", into = "RawConfig")]
pub struct AuditConfig {
    pub data: DataConfig,
    pub oracle: OracleConfig,
    pub settings: AuditSettings,
}

/// Flat on-disk layout of [`AuditConfig`], so unknown keys are rejected.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: DataConfig,
    oracle: OracleConfig,
    #[serde(default = "d_theta")]
    theta: f64,
    #[serde(default = "d_bins")]
    bins: usize,
    #[serde(default)]
    interval_mode: IntervalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_rules_per_set: Option<usize>,
    #[serde(default = "d_max_rules")]
    max_rules_per_feature: usize,
    #[serde(default = "d_threshold")]
    threshold: f64,
    #[serde(default = "d_top_k")]
    top_k: usize,
    #[serde(default)]
    jobs: usize,
    #[serde(default)]
    scorer: ScorerConfig,
    #[serde(default)]
    sampler: SamplerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mitigation: Option<MitigationConfig>,
}

fn d_theta() -> f64 {
    AuditSettings::default().theta
}
fn d_bins() -> usize {
    AuditSettings::default().bins
}
fn d_max_rules() -> usize {
    DEFAULT_MAX_RULES_PER_FEATURE
}
fn d_threshold() -> f64 {
    AuditSettings::default().threshold
}
fn d_top_k() -> usize {
    AuditSettings::default().top_k
}

impl From<RawConfig> for AuditConfig {
    fn from(r: RawConfig) -> Self {
        AuditConfig {
            data: r.data,
            oracle: r.oracle,
            settings: AuditSettings {
                theta: r.theta,
                bins: r.bins,
                interval_mode: r.interval_mode,
                max_rules_per_set: r.max_rules_per_set,
                max_rules_per_feature: r.max_rules_per_feature,
                threshold: r.threshold,
                top_k: r.top_k,
                jobs: r.jobs,
                scorer: r.scorer,
                sampler: r.sampler,
                mitigation: r.mitigation,
            },
        }
    }
}

impl From<AuditConfig> for RawConfig {
    fn from(c: AuditConfig) -> Self {
        let s = c.settings;
        RawConfig {
            data: c.data,
            oracle: c.oracle,
            theta: s.theta,
            bins: s.bins,
            interval_mode: s.interval_mode,
            max_rules_per_set: s.max_rules_per_set,
            max_rules_per_feature: s.max_rules_per_feature,
            threshold: s.threshold,
            top_k: s.top_k,
            jobs: s.jobs,
            scorer: s.scorer,
            sampler: s.sampler,
            mitigation: s.mitigation,
        }
    }
}

impl AuditConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut config =
            Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            DataConfig::Structured { path, schema } => {
                fix(path);
                fix(schema);
            }
            DataConfig::Text { path, lexicon, .. } => {
                fix(path);
                if let Some(l) = lexicon {
                    fix(l);
                }
            }
        }
        if let OracleConfig::Mlp { path } = &mut self.oracle {
            fix(path);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let OracleConfig::Subprocess {
            command,
            timeout_secs,
        } = &self.oracle
        {
            if command.is_empty() {
                return Err(Error::Config("subprocess oracle needs a command".into()));
            }
            if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                return Err(Error::Config("oracle timeout must be positive".into()));
            }
        }
        if matches!(
            (&self.data, &self.oracle),
            (DataConfig::Text { .. }, OracleConfig::Mlp { .. })
        ) {
            return Err(Error::Config(
                "text data needs a subprocess oracle; the built-in network takes feature vectors".into(),
            ));
        }
        self.settings.validate()
    }
}

/// Lexicon for a text audit: explicit path, then `$FAIRSUB_LEXICON`, then built-in.
pub fn resolve_lexicon(explicit: Option<&Path>) -> Result<Lexicon> {
    if let Some(p) = explicit {
        return Lexicon::from_file(p);
    }
    match std::env::var_os(LEXICON_ENV) {
        Some(p) if !p.is_empty() => Lexicon::from_file(PathBuf::from(p)),
        _ => Ok(Lexicon::builtin()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub mining_secs: f64,
    pub scoring_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mitigation_secs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub data_kind: String,
    pub samples: usize,
    pub favorable_label: String,
    /// Single-feature (or single-term) rules.
    pub rules: usize,
    /// Rule sets before support filtering.
    pub candidates: u128,
    /// Rule sets whose support was computed during pruned enumeration.
    pub evaluated: usize,
    pub frequent: usize,
    pub skipped_empty_complement: usize,
    pub findings: Ranking,
    /// Wall-clock times; left out of deterministic output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<PhaseTimings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigation: Option<MitigationSummary>,
}

/// Counter samples produced by a mitigation phase.
#[derive(Clone, Debug)]
pub enum Augmentation {
    Structured {
        rows: Vec<Vec<f64>>,
        label: usize,
    },
    Text {
        documents: Vec<Vec<String>>,
        label: String,
    },
}

#[derive(Clone, Debug)]
pub enum LoadedData {
    Structured(StructuredDataset),
    Text(TextDataset),
}

/// An audit's report plus the artifacts a caller may want to write out.
#[derive(Debug)]
pub struct AuditRun {
    pub report: AuditReport,
    /// Retrained network, when mitigation retrained one.
    pub model: Option<MlpModel>,
    pub augmentation: Option<Augmentation>,
}

impl AuditRun {
    /// Writes the dataset plus counter samples with a provenance column.
    pub fn write_augmented<W: std::io::Write>(&self, data: &LoadedData, writer: W) -> Result<bool> {
        match (&self.augmentation, data) {
            (Some(Augmentation::Structured { rows, label }), LoadedData::Structured(d)) => {
                write_augmented_structured(writer, d, rows, *label)?;
                Ok(true)
            }
            (Some(Augmentation::Text { documents, label }), LoadedData::Text(d)) => {
                write_augmented_text(writer, d, documents, label)?;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}

pub fn load_data(config: &DataConfig) -> Result<LoadedData> {
    match config {
        DataConfig::Structured { path, schema } => {
            let schema = FeatureSchema::from_file(schema)?;
            Ok(LoadedData::Structured(load_structured(path, &schema)?))
        }
        DataConfig::Text { path, lexicon, .. } => {
            let lexicon = resolve_lexicon(lexicon.as_deref())?;
            Ok(LoadedData::Text(load_text(path, &lexicon)?))
        }
    }
}

/// The configured oracle, plus the network itself when it is a built-in one.
pub fn load_oracle(
    config: &OracleConfig,
    data: &LoadedData,
) -> Result<(Box<dyn PredictionOracle>, Option<MlpModel>)> {
    match config {
        OracleConfig::Mlp { path } => {
            let LoadedData::Structured(d) = data else {
                return Err(Error::Config("the built-in network needs structured data".into()));
            };
            let model = MlpModel::from_file(path)?;
            let oracle = MlpOracle::new(model.clone(), &d.schema)?;
            Ok((Box::new(oracle), Some(model)))
        }
        OracleConfig::Subprocess {
            command,
            timeout_secs,
        } => {
            let schema = match data {
                LoadedData::Structured(d) => Some(d.schema.clone()),
                LoadedData::Text(_) => None,
            };
            let oracle = SubprocessOracle::spawn(command, Duration::from_secs_f64(*timeout_secs), schema)?;
            Ok((Box::new(oracle), None))
        }
    }
}

/// Rule space and frequent rule sets of a structured dataset.
pub fn mine_structured(
    dataset: &StructuredDataset,
    settings: &AuditSettings,
) -> Result<(RuleSpace, MiningOutcome)> {
    let space = RuleSpace::structured(
        &dataset.schema,
        settings.bins,
        settings.interval_mode,
        settings.max_rules_per_feature,
    )?;
    let outcome = frequent_rule_sets(dataset, &space, settings.theta, settings.max_rules_per_set)?;
    Ok((space, outcome))
}

pub fn mine_text(dataset: &TextDataset, settings: &AuditSettings) -> Result<(RuleSpace, MiningOutcome)> {
    let space = RuleSpace::text(&dataset.lexicon)?;
    let outcome = frequent_rule_sets(dataset, &space, settings.theta, settings.max_rules_per_set)?;
    Ok((space, outcome))
}

fn base_report(
    kind: &str,
    samples: usize,
    favorable: &str,
    space: &RuleSpace,
    mined: &MiningOutcome,
    findings: Ranking,
) -> AuditReport {
    AuditReport {
        data_kind: kind.to_string(),
        samples,
        favorable_label: favorable.to_string(),
        rules: space.rule_count(),
        candidates: space.candidate_count(),
        evaluated: mined.evaluated,
        frequent: mined.frequent.len(),
        skipped_empty_complement: mined.skipped_empty_complement,
        findings,
        timings: None,
        mitigation: None,
    }
}

/// Mines, scores and ranks a structured dataset. When `settings.mitigation`
/// is set, the worst finding is mitigated: by retraining if `model` is the
/// network behind `oracle`, otherwise by emitting counter samples only.
pub fn audit_structured<O: PredictionOracle + ?Sized>(
    dataset: &StructuredDataset,
    oracle: &O,
    model: Option<&MlpModel>,
    settings: &AuditSettings,
) -> Result<AuditRun> {
    settings.validate()?;
    let favorable = dataset.schema.favorable_label.clone();

    let t0 = Instant::now();
    let (space, mined) = mine_structured(dataset, settings).map_err(|e| e.in_phase("rule mining"))?;
    let mining_secs = t0.elapsed().as_secs_f64();
    info!(
        "{} of {} candidate rule sets are frequent at theta = {}",
        mined.frequent.len(),
        space.candidate_count(),
        settings.theta
    );

    let t1 = Instant::now();
    let rule_sets: Vec<RuleSet> = mined.frequent.iter().map(|s| s.rule_set.clone()).collect();
    let reports = score_rule_sets(
        oracle,
        &rule_sets,
        |rs| StructuredSampler::new(dataset, rs, &settings.sampler),
        &favorable,
        &settings.scorer,
        settings.jobs,
    )
    .map_err(|e| e.in_phase("scoring"))?;
    let scoring_secs = t1.elapsed().as_secs_f64();

    let ranking = rank_rule_sets(reports, settings.threshold, settings.top_k);
    let mut report = base_report("structured", dataset.len(), &favorable, &space, &mined, ranking);
    let mut run_model = None;
    let mut augmentation = None;
    let mut mitigation_secs = None;

    if let (Some(mcfg), Some(worst)) = (&settings.mitigation, report.findings.ranked.first()) {
        let t2 = Instant::now();
        let worst = worst.report.clone();
        match model {
            Some(model) => {
                let out = mitigate(model, dataset, &worst, &settings.scorer, &settings.sampler, mcfg)
                    .map_err(|e| e.in_phase("mitigation"))?;
                if out.summary.chosen_round.is_some() {
                    run_model = Some(out.model);
                    augmentation = Some(Augmentation::Structured {
                        rows: out.augmentation,
                        label: out.augmentation_label,
                    });
                }
                report.mitigation = Some(out.summary);
            }
            None => {
                let sampler = StructuredSampler::new(dataset, &worst.rule_set, &settings.sampler)?;
                let (target, samples) = augmentation_samples(
                    oracle,
                    &sampler,
                    &worst,
                    &dataset.schema.labels,
                    &favorable,
                    dataset.len(),
                    mcfg,
                )
                .map_err(|e| e.in_phase("mitigation"))?;
                augmentation = Some(Augmentation::Structured {
                    rows: samples
                        .into_iter()
                        .filter_map(|s| s.features().map(<[f64]>::to_vec))
                        .collect(),
                    label: dataset
                        .schema
                        .label_index(&target)
                        .expect("target is a schema label"),
                });
            }
        }
        mitigation_secs = Some(t2.elapsed().as_secs_f64());
    }

    report.timings = Some(PhaseTimings {
        mining_secs,
        scoring_secs,
        mitigation_secs,
    });
    Ok(AuditRun {
        report,
        model: run_model,
        augmentation,
    })
}

/// Mines, scores and ranks a text dataset. Mitigation only emits counter samples.
pub fn audit_text<O: PredictionOracle + ?Sized>(
    dataset: &TextDataset,
    oracle: &O,
    favorable: &str,
    settings: &AuditSettings,
) -> Result<AuditRun> {
    settings.validate()?;
    let t0 = Instant::now();
    let (space, mined) = mine_text(dataset, settings).map_err(|e| e.in_phase("rule mining"))?;
    let mining_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let rule_sets: Vec<RuleSet> = mined.frequent.iter().map(|s| s.rule_set.clone()).collect();
    let reports = score_rule_sets(
        oracle,
        &rule_sets,
        |rs| TextSampler::new(dataset, rs),
        favorable,
        &settings.scorer,
        settings.jobs,
    )
    .map_err(|e| e.in_phase("scoring"))?;
    let scoring_secs = t1.elapsed().as_secs_f64();

    let ranking = rank_rule_sets(reports, settings.threshold, settings.top_k);
    let mut report = base_report("text", dataset.len(), favorable, &space, &mined, ranking);
    let mut augmentation = None;
    let mut mitigation_secs = None;

    if let (Some(mcfg), Some(worst)) = (&settings.mitigation, report.findings.ranked.first()) {
        let t2 = Instant::now();
        let worst = worst.report.clone();
        let mut labels: Vec<String> = dataset.documents.iter().map(|d| d.label.clone()).collect();
        labels.sort();
        labels.dedup();
        if !labels.iter().any(|l| l == favorable) {
            labels.insert(0, favorable.to_string());
        }
        let sampler = TextSampler::new(dataset, &worst.rule_set)?;
        let (target, samples) =
            augmentation_samples(oracle, &sampler, &worst, &labels, favorable, dataset.len(), mcfg)
                .map_err(|e| e.in_phase("mitigation"))?;
        augmentation = Some(Augmentation::Text {
            documents: samples
                .into_iter()
                .filter_map(|s| match s {
                    Sample::Tokens(t) => Some(t),
                    Sample::Features(_) => None,
                })
                .collect(),
            label: target,
        });
        mitigation_secs = Some(t2.elapsed().as_secs_f64());
    }

    report.timings = Some(PhaseTimings {
        mining_secs,
        scoring_secs,
        mitigation_secs,
    });
    Ok(AuditRun {
        report,
        model: None,
        augmentation,
    })
}

/// Loads data and oracle from `config` and runs the whole pipeline.
pub fn run_audit(config: &AuditConfig) -> Result<(AuditRun, LoadedData)> {
    config.validate()?;
    let data = load_data(&config.data).map_err(|e| e.in_phase("loading data"))?;
    let (oracle, model) = load_oracle(&config.oracle, &data).map_err(|e| e.in_phase("starting oracle"))?;
    let run = match (&data, &config.data) {
        (LoadedData::Structured(d), _) => {
            audit_structured(d, oracle.as_ref(), model.as_ref(), &config.settings)?
        }
        (LoadedData::Text(d), DataConfig::Text { favorable_label, .. }) => {
            audit_text(d, oracle.as_ref(), favorable_label, &config.settings)?
        }
        (LoadedData::Text(_), DataConfig::Structured { .. }) => unreachable!("data kind follows config"),
    };
    Ok((run, data))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequentEntry {
    pub description: String,
    pub support: f64,
    pub satisfying: usize,
    pub total: usize,
    pub rule_set: RuleSet,
}

/// Output of rule mining alone, without scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RulesReport {
    pub rules: usize,
    pub candidates: u128,
    pub evaluated: usize,
    pub skipped_empty_complement: usize,
    pub frequent: Vec<FrequentEntry>,
}

pub fn mine(data: &LoadedData, settings: &AuditSettings) -> Result<RulesReport> {
    settings.validate()?;
    let (space, mined) = match data {
        LoadedData::Structured(d) => mine_structured(d, settings)?,
        LoadedData::Text(d) => mine_text(d, settings)?,
    };
    Ok(RulesReport {
        rules: space.rule_count(),
        candidates: space.candidate_count(),
        evaluated: mined.evaluated,
        skipped_empty_complement: mined.skipped_empty_complement,
        frequent: mined
            .frequent
            .into_iter()
            .map(|s| FrequentEntry {
                description: s.rule_set.to_string(),
                support: s.support,
                satisfying: s.satisfying,
                total: s.total,
                rule_set: s.rule_set,
            })
            .collect(),
    })
}

/// `n` generated samples on `side` of `rule_set` as JSON objects, drawn from
/// the stream the scorer would use for that rule set and side.
pub fn debug_samples(
    data: &LoadedData,
    rule_set: &RuleSet,
    side: Side,
    n: usize,
    settings: &AuditSettings,
) -> Result<Vec<serde_json::Value>> {
    let mut rng = crate::seed::stream(settings.scorer.rng_seed, &[rule_set.fingerprint(), side.index()]);
    let mut out = Vec::with_capacity(n);
    match data {
        LoadedData::Structured(d) => {
            let sampler = StructuredSampler::new(d, rule_set, &settings.sampler)?;
            for _ in 0..n {
                let Sample::Features(row) = sampler.draw(side, &mut rng)? else {
                    unreachable!("structured sampler yields features")
                };
                let features: serde_json::Map<String, serde_json::Value> = d
                    .schema
                    .features
                    .iter()
                    .zip(&row)
                    .map(|(f, &v)| (f.name.clone(), f.json_value(v)))
                    .collect();
                out.push(serde_json::json!({ "side": side.as_str(), "features": features }));
            }
        }
        LoadedData::Text(d) => {
            let sampler = TextSampler::new(d, rule_set)?;
            for _ in 0..n {
                let Sample::Tokens(tokens) = sampler.draw(side, &mut rng)? else {
                    unreachable!("text sampler yields tokens")
                };
                out.push(serde_json::json!({ "side": side.as_str(), "tokens": tokens }));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

/// JSON is lossless; markdown shows the top findings as a table.
pub fn render_report(report: &AuditReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Markdown => Ok(render_markdown(report)),
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

/// A score cell such as `20.2% (29.9%, 9.7%)`.
pub fn score_cell(score: f64, phi_r: f64, phi_not_r: f64) -> String {
    format!("{} ({}, {})", pct(score), pct(phi_r), pct(phi_not_r))
}

fn render_markdown(report: &AuditReport) -> String {
    let mut out = String::new();
    let r = report;
    let flagged = r.findings.flagged().count();
    let _ = writeln!(
        out,
        "{} frequent of {} candidate rule sets ({} {} samples, favorable label `{}`).",
        r.frequent, r.candidates, r.samples, r.data_kind, r.favorable_label
    );
    let _ = writeln!(
        out,
        "{flagged} rule set(s) score above {}.\n",
        pct(r.findings.threshold)
    );
    out.push_str("| Rule Set | Fairness Score (φ_r, φ_¬r) |\n|---|---|\n");
    for f in r.findings.top() {
        let rep = &f.report;
        let _ = writeln!(
            out,
            "| {} | {} |",
            rep.description.replace('|', "\\|"),
            score_cell(rep.score, rep.phi_r, rep.phi_not_r)
        );
    }
    if let Some(m) = &r.mitigation {
        let _ = writeln!(
            out,
            "\nMitigation of `{}` (counter label `{}`):\n",
            m.rule_set, m.target_label
        );
        out.push_str("| Model | Fairness Score (φ_r, φ_¬r) | Held-out Accuracy |\n|---|---|---|\n");
        let _ = writeln!(
            out,
            "| original | {} | {} |",
            score_cell(m.before.score, m.before.phi_r, m.before.phi_not_r),
            pct(m.accuracy_before)
        );
        match m.chosen_round {
            Some(i) => {
                let _ = writeln!(
                    out,
                    "| retrained (+{} samples) | {} | {} |",
                    m.rounds[i].count,
                    score_cell(m.after.score, m.after.phi_r, m.after.phi_not_r),
                    pct(m.accuracy_after)
                );
            }
            None => out.push_str("\nNo retraining round stayed within the accuracy budget.\n"),
        }
    }
    out
}

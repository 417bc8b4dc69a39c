mod common;

use std::path::Path;

use fairsub::audit::{
    audit_structured, audit_text, render_report, run_audit, AuditConfig, AuditSettings, Augmentation,
    ReportFormat,
};
use fairsub::data::{Lexicon, Sample, TextDataset};
use fairsub::mitigation::{generate_counter_samples, MitigationConfig};
use fairsub::oracle::{FnOracle, MlpModel, PredictionOracle};
use fairsub::rules::{Rule, RuleSet};
use fairsub::sampler::{SamplerConfig, StructuredSampler};
use fairsub::scorer::ScorerConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn demo() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../demo"))
}

fn ticket_oracle() -> FnOracle<impl Fn(&Sample) -> String + Send + Sync> {
    FnOracle(|s: &Sample| {
        let f = s.features().unwrap();
        let cut = if common::is_planted(f) { 20.0 } else { 50.0 };
        if f[3] < cut { "1" } else { "0" }.to_string()
    })
}

fn quick() -> AuditSettings {
    AuditSettings {
        theta: 0.15,
        bins: 5,
        ..AuditSettings::default()
    }
}

fn strip_timings(mut run: fairsub::audit::AuditRun) -> String {
    run.report.timings = None;
    render_report(&run.report, ReportFormat::Json).unwrap()
}

#[test]
fn structured_audit_is_deterministic_and_thread_independent() {
    let d = common::planted_dataset(|_, _, _| 0);
    let one = AuditSettings { jobs: 1, ..quick() };
    let four = AuditSettings { jobs: 4, ..quick() };
    let a = strip_timings(audit_structured(&d, &ticket_oracle(), None, &one).unwrap());
    let b = strip_timings(audit_structured(&d, &ticket_oracle(), None, &one).unwrap());
    let c = strip_timings(audit_structured(&d, &ticket_oracle(), None, &four).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn different_seed_changes_estimates_not_structure() {
    let d = common::planted_dataset(|_, _, _| 0);
    let mut other = quick();
    other.scorer.rng_seed = 99;
    other.sampler.rng_seed = 99;
    let a = audit_structured(&d, &ticket_oracle(), None, &quick())
        .unwrap()
        .report;
    let b = audit_structured(&d, &ticket_oracle(), None, &other)
        .unwrap()
        .report;
    assert_eq!(a.frequent, b.frequent);
    assert_ne!(
        a.findings.ranked.iter().map(|f| f.report.num).collect::<Vec<_>>(),
        b.findings.ranked.iter().map(|f| f.report.num).collect::<Vec<_>>()
    );
}

#[test]
fn ranking_is_sorted_and_flags_follow_threshold() {
    let d = common::planted_dataset(|_, _, _| 0);
    let report = audit_structured(&d, &ticket_oracle(), None, &quick())
        .unwrap()
        .report;
    let ranked = &report.findings.ranked;
    assert_eq!(ranked.len(), report.frequent);
    for (i, pair) in ranked.windows(2).enumerate() {
        assert!(pair[0].report.score >= pair[1].report.score, "rank {i}");
    }
    for f in ranked {
        assert_eq!(f.flagged, f.report.score > 0.05);
        assert!(f.report.epsilon <= 0.05 || !f.report.converged);
    }
}

#[test]
fn nothing_frequent_gives_an_empty_table() {
    let d = common::planted_dataset(|_, _, _| 0);
    let settings = AuditSettings {
        theta: 0.99,
        ..quick()
    };
    let report = audit_structured(&d, &ticket_oracle(), None, &settings)
        .unwrap()
        .report;
    assert_eq!(report.frequent, 0);
    assert!(report.findings.ranked.is_empty());
    let md = render_report(&report, ReportFormat::Markdown).unwrap();
    assert!(
        md.ends_with("| Rule Set | Fairness Score (φ_r, φ_¬r) |\n|---|---|\n"),
        "{md}"
    );
}

#[test]
fn external_oracle_mitigation_emits_counter_samples_only() {
    let d = common::planted_dataset(|_, _, _| 0);
    let settings = AuditSettings {
        mitigation: Some(MitigationConfig::default()),
        ..quick()
    };
    let oracle = ticket_oracle();
    let run = audit_structured(&d, &oracle, None, &settings).unwrap();
    assert!(run.model.is_none());
    assert!(run.report.mitigation.is_none());
    let worst = &run.report.findings.ranked[0].report;
    let Some(Augmentation::Structured { rows, label }) = &run.augmentation else {
        panic!("no augmentation")
    };
    assert_eq!(rows.len(), 600);
    let favorable = d.schema.label_index("1").unwrap();
    assert_eq!(*label, favorable);
    for row in rows {
        assert!(worst
            .rule_set
            .rules()
            .iter()
            .all(|r| common::row_satisfies(&d.schema, row, r)));
        assert_eq!(oracle.predict(&Sample::Features(row.clone())).unwrap(), "1");
    }
}

#[test]
fn counter_samples_satisfy_rule_set_and_target() {
    let d = common::planted_dataset(|_, _, _| 0);
    let oracle = ticket_oracle();
    let rs = RuleSet::new(vec![Rule::Categorical {
        feature: "race".into(),
        values: vec!["Black".into(), "Other".into()],
    }])
    .unwrap();
    let sampler = StructuredSampler::new(&d, &rs, &SamplerConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for target in ["0", "1"] {
        let kept = generate_counter_samples(&oracle, &sampler, target, 300, 30_000, &mut rng).unwrap();
        assert_eq!(kept.len(), 300);
        for s in &kept {
            let row = s.features().unwrap();
            assert!(common::row_satisfies(&d.schema, row, &rs.rules()[0]));
            assert_eq!(oracle.predict(s).unwrap(), target);
        }
    }
}

#[test]
fn text_audit_finds_the_disfavored_term() {
    let lexicon = Lexicon::builtin();
    let texts: Vec<(String, String)> = (0..300)
        .map(|i| {
            let who = ["lesbian", "straight", "christian", "young", "asian", "muslim"][i % 6];
            (
                "0".to_string(),
                format!("comment {i} about a {who} neighbor and the weather"),
            )
        })
        .collect();
    let refs: Vec<(&str, &str)> = texts.iter().map(|(l, t)| (l.as_str(), t.as_str())).collect();
    let d = TextDataset::from_texts(lexicon, &refs).unwrap();
    let oracle = FnOracle(|s: &Sample| {
        let toxic = s.tokens().unwrap().iter().any(|t| t == "gay");
        if toxic { "toxic" } else { "ok" }.to_string()
    });
    let settings = AuditSettings {
        theta: 0.05,
        ..AuditSettings::default()
    };
    let report = audit_text(&d, &oracle, "ok", &settings).unwrap().report;
    let top = &report.findings.ranked[0];
    assert!(
        top.report.description.contains("gay"),
        "{}",
        top.report.description
    );
    assert!((top.report.score - 1.0).abs() < 1e-12);
    assert!(top.flagged);
}

#[test]
fn demo_model_file_is_canonical() {
    let text = std::fs::read_to_string(demo().join("model.json")).unwrap();
    let model = MlpModel::from_json(&text).unwrap();
    assert_eq!(model.to_json().unwrap() + "\n", text);
}

#[test]
fn demo_config_runs() {
    let mut config = AuditConfig::from_file(demo().join("audit.json")).unwrap();
    config.settings.theta = 0.3;
    config.settings.scorer = ScorerConfig {
        sample_thr: 200,
        error_thr: 0.1,
        ..ScorerConfig::default()
    };
    let (run, _) = run_audit(&config).unwrap();
    assert_eq!(run.report.data_kind, "structured");
    assert_eq!(run.report.samples, 2000);
    assert!(run.report.frequent > 0);
}

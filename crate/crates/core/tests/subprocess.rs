use std::time::Duration;

use fairsub::data::{FeatureSchema, FeatureSpec, Sample};
use fairsub::oracle::{OracleError, PredictionOracle, SubprocessOracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STUB: &str = env!("CARGO_BIN_EXE_fairsub-oracle-stub");

fn spawn(args: &[&str], schema: Option<FeatureSchema>) -> SubprocessOracle {
    let mut argv = vec![STUB.to_string()];
    argv.extend(args.iter().map(|a| a.to_string()));
    SubprocessOracle::spawn(&argv, Duration::from_secs(10), schema).unwrap()
}

fn schema() -> FeatureSchema {
    FeatureSchema::new(
        vec![
            FeatureSpec::categorical("gender", &["male", "female"], true),
            FeatureSpec::continuous("age", 0.0, 100.0, true, true),
        ],
        &["0", "1"],
        "1",
    )
    .unwrap()
}

fn random_rows(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Sample::Features(vec![rng.gen_range(0..2) as f64, rng.gen_range(0..=100) as f64]))
        .collect()
}

#[test]
fn constant_stub() {
    let oracle = spawn(&["--constant", "0"], Some(schema()));
    let labels = oracle.predict_batch(&random_rows(20, 1)).unwrap();
    assert_eq!(labels, vec!["0"; 20]);
}

#[test]
fn threshold_stub_agrees_with_predicate() {
    let oracle = spawn(&["--threshold", "1", "50"], Some(schema()));
    let samples = random_rows(100, 2);
    let labels = oracle.predict_batch(&samples).unwrap();
    for (s, l) in samples.iter().zip(&labels) {
        let expected = if s.features().unwrap()[1] >= 50.0 {
            "1"
        } else {
            "0"
        };
        assert_eq!(l, expected);
    }
}

#[test]
fn reordered_responses_are_matched_by_id() {
    let samples = random_rows(1000, 3);
    let plain = spawn(&["--threshold", "1", "50"], Some(schema()));
    let shuffled = spawn(&["--threshold", "1", "50", "--reorder", "50"], Some(schema()));
    assert_eq!(
        plain.predict_batch(&samples).unwrap(),
        shuffled.predict_batch(&samples).unwrap()
    );
}

#[test]
fn batch_equals_elementwise() {
    let oracle = spawn(&["--threshold", "1", "30"], Some(schema()));
    let samples = random_rows(40, 4);
    let batch = oracle.predict_batch(&samples).unwrap();
    let single: Vec<String> = samples.iter().map(|s| oracle.predict(s).unwrap()).collect();
    assert_eq!(batch, single);
}

#[test]
fn token_requests() {
    let oracle = spawn(&["--contains", "gay"], None);
    let docs = vec![
        Sample::Tokens(vec!["i".into(), "am".into(), "gay".into()]),
        Sample::Tokens(vec!["i".into(), "am".into(), "here".into()]),
    ];
    assert_eq!(oracle.predict_batch(&docs).unwrap(), vec!["1", "0"]);
}

#[test]
fn exited_child_is_an_error() {
    let oracle = spawn(&["--exit-after", "5"], Some(schema()));
    let err = oracle.predict_batch(&random_rows(10, 5)).unwrap_err();
    assert!(matches!(err, OracleError::Exited(_)), "{err}");
    // The oracle stays failed rather than inventing labels later.
    assert!(oracle.predict_batch(&random_rows(1, 6)).is_err());
}

#[test]
fn malformed_line_is_an_error() {
    let oracle = spawn(&["--garbage"], Some(schema()));
    let err = oracle.predict_batch(&random_rows(1, 7)).unwrap_err();
    assert!(matches!(err, OracleError::Malformed { .. }), "{err}");
}

#[test]
fn unknown_id_is_an_error() {
    let oracle = spawn(&["--wrong-id"], Some(schema()));
    let err = oracle.predict_batch(&random_rows(1, 8)).unwrap_err();
    assert!(matches!(err, OracleError::UnexpectedId(1_000_000)), "{err}");
}

#[test]
fn slow_child_times_out() {
    let argv = vec![STUB.to_string(), "--sleep-ms".into(), "2000".into()];
    let oracle = SubprocessOracle::spawn(&argv, Duration::from_millis(100), Some(schema())).unwrap();
    let err = oracle.predict_batch(&random_rows(1, 9)).unwrap_err();
    assert!(matches!(err, OracleError::Timeout(_)), "{err}");
}

#[test]
fn missing_program_fails_to_spawn() {
    let argv = vec!["/definitely/not/here".to_string()];
    let err = SubprocessOracle::spawn(&argv, Duration::from_secs(1), None)
        .err()
        .unwrap();
    assert!(matches!(err, OracleError::Spawn { .. }));
}

#[test]
fn killed_child_surfaces_transport_error() {
    // Answers two requests, then dies mid-batch.
    let oracle = spawn(&["--exit-after", "2"], Some(schema()));
    assert_eq!(oracle.predict_batch(&random_rows(2, 10)).unwrap().len(), 2);
    assert!(oracle.predict_batch(&random_rows(3, 11)).is_err());
}

#[test]
fn shared_across_threads() {
    let oracle = spawn(&["--threshold", "1", "50", "--reorder", "4"], Some(schema()));
    std::thread::scope(|s| {
        for t in 0..4 {
            let oracle = &oracle;
            s.spawn(move || {
                let samples = random_rows(64, 100 + t);
                let labels = oracle.predict_batch(&samples).unwrap();
                for (x, l) in samples.iter().zip(labels) {
                    assert_eq!(l == "1", x.features().unwrap()[1] >= 50.0);
                }
            });
        }
    });
}

#[test]
fn labels_outside_the_schema_are_rejected() {
    let oracle = spawn(&["--constant", "maybe"], Some(schema()));
    let err = oracle.predict_batch(&random_rows(3, 12)).unwrap_err();
    assert!(matches!(err, OracleError::Malformed { .. }), "{err}");
}

#[test]
fn renamed_labels() {
    let oracle = spawn(&["--threshold", "1", "50", "--labels", "no", "yes"], None);
    let samples = vec![
        Sample::Features(vec![0.0, 10.0]),
        Sample::Features(vec![1.0, 60.0]),
    ];
    assert_eq!(oracle.predict_batch(&samples).unwrap(), vec!["no", "yes"]);
}

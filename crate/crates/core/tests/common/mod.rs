//! Brute-force references and synthetic data shared by integration tests.

#![allow(dead_code)]

use fairsub::data::{FeatureKind, FeatureSchema, FeatureSpec, StructuredDataset};
use fairsub::rules::{Rule, RuleSet, RuleSpace};
use itertools::Itertools;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Rule semantics written out from scratch: value names for categorical
/// rules, `floor((v - min) / width)` bin arithmetic for interval rules.
pub fn row_satisfies(schema: &FeatureSchema, row: &[f64], rule: &Rule) -> bool {
    match rule {
        Rule::Categorical { feature, values } => {
            let i = schema.features.iter().position(|f| &f.name == feature).unwrap();
            let FeatureKind::Categorical { values: names } = &schema.features[i].kind else {
                panic!("not categorical")
            };
            values.contains(&names[row[i] as usize])
        }
        Rule::Interval {
            feature,
            first,
            last,
            bins,
            ..
        } => {
            let i = schema.features.iter().position(|f| &f.name == feature).unwrap();
            let FeatureKind::Continuous { min, max, .. } = schema.features[i].kind else {
                panic!("not continuous")
            };
            let width = (max - min) / *bins as f64;
            let bin = (((row[i] - min) / width).floor() as usize).min(bins - 1);
            (*first..=*last).contains(&bin)
        }
        Rule::Term { .. } => panic!("term rule on structured data"),
    }
}

pub fn count_satisfying(dataset: &StructuredDataset, rules: &[Rule]) -> usize {
    dataset
        .rows
        .iter()
        .filter(|row| rules.iter().all(|r| row_satisfies(&dataset.schema, row, r)))
        .count()
}

/// Every combination of at most one rule per group, scanned row by row.
pub fn naive_frequent(dataset: &StructuredDataset, space: &RuleSpace, theta: f64) -> Vec<(RuleSet, usize)> {
    let n = dataset.len();
    let mut out: Vec<(RuleSet, usize)> = space
        .groups
        .iter()
        .map(|g| (0..=g.rules.len()).collect::<Vec<_>>())
        .multi_cartesian_product()
        .filter_map(|choice| {
            let rules: Vec<Rule> = choice
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(g, &c)| space.groups[g].rules[c - 1].clone())
                .collect();
            if rules.is_empty() {
                return None;
            }
            let count = count_satisfying(dataset, &rules);
            (count as f64 / n as f64 >= theta && count < n).then(|| (RuleSet::new(rules).unwrap(), count))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// A small schema with 1 to 3 sensitive features (categorical with 2 to 4
/// values, or integer-valued continuous) and one non-sensitive feature.
pub fn random_schema(rng: &mut ChaCha8Rng) -> FeatureSchema {
    let names = ["a", "b", "c"];
    let k = rng.gen_range(1..=3);
    let mut features: Vec<FeatureSpec> = (0..k)
        .map(|i| {
            if rng.gen_bool(0.6) {
                let n = rng.gen_range(2..=4);
                let values: Vec<String> = (0..n).map(|v| format!("v{v}")).collect();
                let refs: Vec<&str> = values.iter().map(String::as_str).collect();
                FeatureSpec::categorical(names[i], &refs, true)
            } else {
                FeatureSpec::continuous(names[i], 0.0, 20.0, true, true)
            }
        })
        .collect();
    features.push(FeatureSpec::continuous("x", 0.0, 10.0, false, false));
    FeatureSchema::new(features, &["0", "1"], "1").unwrap()
}

/// Rows drawn with skewed value frequencies so supports spread out.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_rows: usize) -> StructuredDataset {
    let schema = random_schema(rng);
    let n = rng.gen_range(1..=max_rows);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            schema
                .features
                .iter()
                .map(|f| match &f.kind {
                    FeatureKind::Categorical { values } => {
                        let u: f64 = rng.gen();
                        ((u * u) * values.len() as f64)
                            .floor()
                            .min(values.len() as f64 - 1.0)
                    }
                    FeatureKind::Continuous { min, max, integer } => {
                        let v = rng.gen_range(*min..=*max);
                        if *integer {
                            v.round()
                        } else {
                            (v * 100.0).round() / 100.0
                        }
                    }
                })
                .collect()
        })
        .collect();
    let labels = (0..n).map(|_| rng.gen_range(0..2)).collect();
    StructuredDataset::new(schema, rows, labels).unwrap()
}

pub const RACES: [&str; 5] = ["White", "Black", "Asian", "Hispanic", "Other"];
/// Rows per race; every race is at least 15% of 6000.
pub const RACE_ROWS: [usize; 5] = [1800, 1260, 1000, 980, 960];

/// gender, race and age are sensitive; `ticket` (0..=99) is the only feature
/// the sampler may perturb.
pub fn planted_schema() -> FeatureSchema {
    FeatureSchema::new(
        vec![
            FeatureSpec::categorical("gender", &["male", "female"], true),
            FeatureSpec::categorical("race", &RACES, true),
            FeatureSpec::continuous("age", 0.0, 100.0, true, true),
            FeatureSpec::continuous("ticket", 0.0, 99.0, true, false),
        ],
        &["0", "1"],
        "1",
    )
    .unwrap()
}

pub fn is_planted(row: &[f64]) -> bool {
    row[0] == 1.0 && row[1] == 1.0
}

/// 6000 rows, half of each race female. Within every (gender, race) cell of
/// c rows, tickets are spread evenly over 0..=99 and ages cover each tenth of
/// the range exactly c/10 times, so any age restriction of the planted group
/// {female, Black} (630 rows, support 0.105) keeps at most 90% of it.
/// `label(row, k, c)` gives the class of the k-th row of its cell.
pub fn planted_dataset(mut label: impl FnMut(&[f64], usize, usize) -> usize) -> StructuredDataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (race, &n) in RACE_ROWS.iter().enumerate() {
        for gender in 0..2 {
            let c = n / 2;
            for k in 0..c {
                let ticket = (k * 100 / c) as f64;
                let age = ((k * 7919) % c * 100 / c) as f64;
                let row = vec![gender as f64, race as f64, age, ticket];
                labels.push(label(&row, k, c));
                rows.push(row);
            }
        }
    }
    StructuredDataset::new(planted_schema(), rows, labels).unwrap()
}

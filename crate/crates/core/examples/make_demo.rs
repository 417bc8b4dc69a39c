//! Writes the demo inputs: a loan dataset whose labels disfavor young
//! women, a network trained on it, and configs for both oracle kinds.
//!
//! ```text
//! cargo run -p fairsub --example make_demo -- demo
//! ```

use std::fs::{self, File};
use std::path::PathBuf;

use fairsub::data::{write_structured, FeatureSchema, FeatureSpec, StructuredDataset};
use fairsub::mitigation::{train_mlp, TrainerConfig};
use fairsub::oracle::{Activation, MlpModel, MlpOracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    fs::create_dir_all(&dir)?;

    let schema = FeatureSchema::new(
        vec![
            FeatureSpec::categorical("gender", &["male", "female"], true),
            FeatureSpec::categorical("race", &["white", "black", "asian"], true),
            FeatureSpec::continuous("age", 18.0, 78.0, true, true),
            FeatureSpec::continuous("income", 0.0, 200.0, false, false),
            FeatureSpec::continuous("years_employed", 0.0, 40.0, true, false),
        ],
        &["deny", "approve"],
        "approve",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..2000 {
        let gender = rng.gen_range(0..2) as f64;
        let race = [0.0, 0.0, 1.0, 2.0][rng.gen_range(0..4)];
        let age = rng.gen_range(18..=78) as f64;
        let income = (rng.gen_range(10.0..190.0f64) * 100.0).round() / 100.0;
        let years = rng.gen_range(0..=40.min(age as i32 - 18)) as f64;
        let mut bar = 100.0 - 0.5 * years;
        if gender == 1.0 && age < 36.0 {
            bar += 40.0;
        }
        let approve = income > bar + rng.gen_range(-10.0..10.0);
        rows.push(vec![gender, race, age, income, years]);
        labels.push(usize::from(approve));
    }
    let data = StructuredDataset::new(schema.clone(), rows, labels)?;

    let init = MlpModel::initialize(&schema, &[12], Activation::Relu, &mut rng)?;
    let encoder = MlpOracle::new(init.clone(), &schema)?;
    let x: Vec<Vec<f64>> = data.rows.iter().map(|r| encoder.encode(r)).collect();
    let trainer = TrainerConfig {
        epochs: 80,
        ..TrainerConfig::default()
    };
    let trained = train_mlp(&init, &x, &data.labels, None, &trainer)?;
    eprintln!("training accuracy {:.4}", trained.train_accuracy);

    write_structured(File::create(dir.join("loans.csv"))?, &data, None)?;
    fs::write(
        dir.join("schema.json"),
        serde_json::to_string_pretty(&schema)? + "\n",
    )?;
    fs::write(dir.join("model.json"), trained.model.to_json()? + "\n")?;
    let config = |oracle: serde_json::Value| {
        json!({
            "data": {"kind": "structured", "path": "loans.csv", "schema": "schema.json"},
            "oracle": oracle,
            "theta": 0.05,
            "bins": 6,
            "top_k": 5,
        })
    };
    fs::write(
        dir.join("audit.json"),
        serde_json::to_string_pretty(&config(json!({"kind": "mlp", "path": "model.json"})))? + "\n",
    )?;
    fs::write(
        dir.join("audit-subprocess.json"),
        serde_json::to_string_pretty(&config(json!({
            "kind": "subprocess",
            "command": ["fairsub-oracle-stub", "--threshold", "3", "100", "--labels", "deny", "approve"],
        })))?
            + "\n",
    )?;
    Ok(())
}

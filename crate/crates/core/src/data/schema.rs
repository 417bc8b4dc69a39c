use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::fmt_num;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical {
        values: Vec<String>,
    },
    Continuous {
        min: f64,
        max: f64,
        #[serde(default)]
        integer: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default)]
    pub sensitive: bool,
}

impl FeatureSpec {
    pub fn categorical(name: &str, values: &[&str], sensitive: bool) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Categorical {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
            sensitive,
        }
    }

    pub fn continuous(name: &str, min: f64, max: f64, integer: bool, sensitive: bool) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Continuous { min, max, integer },
            sensitive,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, FeatureKind::Continuous { .. })
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            FeatureKind::Categorical { values } => {
                if values.is_empty() {
                    return Err(Error::Schema(format!("feature `{}` has no values", self.name)));
                }
                let mut seen = HashSet::new();
                for v in values {
                    if !seen.insert(v.as_str()) {
                        return Err(Error::Schema(format!(
                            "feature `{}` lists value `{v}` twice",
                            self.name
                        )));
                    }
                }
            }
            FeatureKind::Continuous { min, max, .. } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(Error::Schema(format!(
                        "feature `{}` needs finite min < max, got [{min}, {max}]",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses a raw cell into the row representation.
    pub fn encode(&self, raw: &str) -> std::result::Result<f64, String> {
        let raw = raw.trim();
        match &self.kind {
            FeatureKind::Categorical { values } => values
                .iter()
                .position(|v| v == raw)
                .map(|i| i as f64)
                .ok_or_else(|| format!("`{raw}` is not a value of `{}`", self.name)),
            FeatureKind::Continuous { min, max, integer } => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| format!("cannot parse `{raw}` as a number for `{}`", self.name))?;
                if !(v >= *min && v <= *max) {
                    return Err(format!(
                        "{} = {raw} is outside [{}, {}]",
                        self.name,
                        fmt_num(*min),
                        fmt_num(*max)
                    ));
                }
                if *integer && v.fract() != 0.0 {
                    return Err(format!("{} = {raw} is not an integer", self.name));
                }
                Ok(v)
            }
        }
    }

    /// Checks a value already in row representation.
    pub fn contains(&self, v: f64) -> bool {
        match &self.kind {
            FeatureKind::Categorical { values } => {
                v >= 0.0 && v.fract() == 0.0 && (v as usize) < values.len()
            }
            FeatureKind::Continuous { min, max, integer } => {
                v >= *min && v <= *max && (!integer || v.fract() == 0.0)
            }
        }
    }

    pub fn display_value(&self, v: f64) -> String {
        match &self.kind {
            FeatureKind::Categorical { values } => values
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| format!("<invalid {v}>")),
            FeatureKind::Continuous { integer: true, .. } => format!("{}", v as i64),
            FeatureKind::Continuous { .. } => format!("{v}"),
        }
    }

    pub fn json_value(&self, v: f64) -> serde_json::Value {
        match &self.kind {
            FeatureKind::Categorical { .. } => serde_json::Value::String(self.display_value(v)),
            FeatureKind::Continuous { integer: true, .. } => serde_json::Value::from(v as i64),
            FeatureKind::Continuous { .. } => serde_json::Value::from(v),
        }
    }
}

/// Feature layout of a structured dataset plus its label space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    /// Name of the label column in data files.
    #[serde(default = "default_label_column")]
    pub label: String,
    pub labels: Vec<String>,
    pub favorable_label: String,
}

fn default_label_column() -> String {
    "label".to_string()
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>, labels: &[&str], favorable_label: &str) -> Result<Self> {
        let schema = FeatureSchema {
            features,
            label: default_label_column(),
            labels: labels.iter().map(|l| l.to_string()).collect(),
            favorable_label: favorable_label.to_string(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let schema: FeatureSchema = serde_json::from_str(json)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            if f.name == self.label {
                return Err(Error::Schema(format!(
                    "feature `{}` collides with the label column",
                    f.name
                )));
            }
            f.validate()?;
        }
        if !self.features.iter().any(|f| f.sensitive) {
            return Err(Error::Schema("no feature is marked sensitive".into()));
        }
        if self.labels.is_empty() {
            return Err(Error::Schema("label list is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::Schema(format!("label `{dup}` listed twice")));
        }
        if self.label_index(&self.favorable_label).is_none() {
            return Err(Error::Schema(format!(
                "favorable label `{}` is not one of {:?}",
                self.favorable_label, self.labels
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn favorable_index(&self) -> usize {
        self.label_index(&self.favorable_label)
            .expect("validated schema contains its favorable label")
    }

    pub fn sensitive(&self) -> impl Iterator<Item = (usize, &FeatureSpec)> {
        self.features.iter().enumerate().filter(|(_, f)| f.sensitive)
    }

    /// Checks a row: length and per-feature domain.
    pub fn check_row(&self, row: &[f64]) -> std::result::Result<(), String> {
        if row.len() != self.features.len() {
            return Err(format!(
                "expected {} features, got {}",
                self.features.len(),
                row.len()
            ));
        }
        for (spec, &v) in self.features.iter().zip(row) {
            if !spec.contains(v) {
                return Err(format!("{} = {v} is outside its domain", spec.name));
            }
        }
        Ok(())
    }
}

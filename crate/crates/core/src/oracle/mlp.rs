//! Feed-forward network evaluated in-process from a JSON weights file.
//!
//! File layout:
//!
//! ```json
//! {
//!   "labels": ["0", "1"],
//!   "encoding": [
//!     {"feature": "gender", "one_hot": ["male", "female"]},
//!     {"feature": "age"}
//!   ],
//!   "normalization": {"age": {"mean": 50.0, "std": 50.0}},
//!   "layers": [
//!     {"weights": [[0.5, -0.5, 1.0]], "bias": [0.0], "activation": "sigmoid"}
//!   ]
//! }
//! ```
//!
//! `encoding` fixes the input layout: a one-hot block per categorical feature
//! (in the listed value order), one input per continuous feature, normalized
//! as `(x - mean) / std` when listed under `normalization`. `weights` are
//! row-major with one row per output unit.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, FeatureSchema, Sample};
use crate::error::{Error, Result};
use crate::oracle::{OracleError, PredictionOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    /// Pre-activation `W x + b`.
    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

pub(crate) fn activate(activation: Activation, z: &mut [f64]) {
    match activation {
        Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Identity => {}
        Activation::Softmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in z.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            z.iter_mut().for_each(|v| *v /= sum);
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputEncoding {
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_hot: Option<Vec<String>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub labels: Vec<String>,
    pub encoding: Vec<InputEncoding>,
    #[serde(default)]
    pub normalization: BTreeMap<String, Normalization>,
    pub layers: Vec<Layer>,
}

impl MlpModel {
    pub fn from_json(json: &str) -> Result<Self> {
        let model: MlpModel = serde_json::from_str(json)?;
        model.validate()?;
        Ok(model)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Model("no layers".into()));
        }
        if self.labels.is_empty() {
            return Err(Error::Model("no labels".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.weights.is_empty() || layer.inputs() == 0 {
                return Err(Error::Model(format!("layer {i} has an empty weight matrix")));
            }
            if layer.weights.iter().any(|r| r.len() != layer.inputs()) {
                return Err(Error::Model(format!("layer {i} has ragged weight rows")));
            }
            if layer.bias.len() != layer.outputs() {
                return Err(Error::Model(format!(
                    "layer {i} has {} outputs but {} biases",
                    layer.outputs(),
                    layer.bias.len()
                )));
            }
            if i > 0 && layer.inputs() != self.layers[i - 1].outputs() {
                return Err(Error::Model(format!(
                    "layer {i} takes {} inputs but layer {} emits {}",
                    layer.inputs(),
                    i - 1,
                    self.layers[i - 1].outputs()
                )));
            }
            if layer.activation == Activation::Softmax && i + 1 != self.layers.len() {
                return Err(Error::Model(format!("softmax on hidden layer {i}")));
            }
            let finite = layer
                .weights
                .iter()
                .flatten()
                .chain(&layer.bias)
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::Model(format!("layer {i} has non-finite parameters")));
            }
        }
        let last = self.layers.last().expect("non-empty");
        let binary_sigmoid =
            last.outputs() == 1 && last.activation == Activation::Sigmoid && self.labels.len() == 2;
        if !binary_sigmoid && last.outputs() != self.labels.len() {
            return Err(Error::Model(format!(
                "final layer emits {} values for {} labels",
                last.outputs(),
                self.labels.len()
            )));
        }
        for (name, n) in &self.normalization {
            if !(n.std.is_finite() && n.std != 0.0 && n.mean.is_finite()) {
                return Err(Error::Model(format!("bad normalization for `{name}`")));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    /// Output of the final layer after its activation.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = layer.affine(&x);
            activate(layer.activation, &mut x);
        }
        x
    }

    /// Label index for an already-encoded input. Single sigmoid outputs are
    /// thresholded at 0.5; otherwise argmax with ties going to the lower index.
    pub fn predict_encoded(&self, input: &[f64]) -> Result<usize, OracleError> {
        if input.len() != self.input_width() {
            return Err(OracleError::Dimension {
                expected: self.input_width(),
                got: input.len(),
            });
        }
        Ok(decide(&self.forward(input), self.labels.len()))
    }

    /// Encoding covering every schema feature in schema order, with continuous
    /// features scaled to [-1, 1] over their declared range.
    pub fn default_encoding(schema: &FeatureSchema) -> (Vec<InputEncoding>, BTreeMap<String, Normalization>) {
        let mut encoding = Vec::new();
        let mut normalization = BTreeMap::new();
        for f in &schema.features {
            match &f.kind {
                FeatureKind::Categorical { values } => encoding.push(InputEncoding {
                    feature: f.name.clone(),
                    one_hot: Some(values.clone()),
                }),
                FeatureKind::Continuous { min, max, .. } => {
                    encoding.push(InputEncoding {
                        feature: f.name.clone(),
                        one_hot: None,
                    });
                    normalization.insert(
                        f.name.clone(),
                        Normalization {
                            mean: (min + max) / 2.0,
                            std: (max - min) / 2.0,
                        },
                    );
                }
            }
        }
        (encoding, normalization)
    }

    /// Randomly initialized network over `schema`'s default encoding with a
    /// softmax head (He-uniform weights for ReLU layers, Glorot otherwise).
    pub fn initialize(
        schema: &FeatureSchema,
        hidden: &[usize],
        hidden_activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let (encoding, normalization) = Self::default_encoding(schema);
        let input_width: usize = encoding
            .iter()
            .map(|e| e.one_hot.as_ref().map_or(1, Vec::len))
            .sum();
        let mut widths = vec![input_width];
        widths.extend_from_slice(hidden);
        widths.push(schema.labels.len());
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let last = i + 2 == widths.len();
                let activation = if last {
                    Activation::Softmax
                } else {
                    hidden_activation
                };
                let limit = if activation == Activation::Relu {
                    (6.0 / fan_in as f64).sqrt()
                } else {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                };
                Layer {
                    weights: (0..fan_out)
                        .map(|_| (0..fan_in).map(|_| rng.gen_range(-limit..limit)).collect())
                        .collect(),
                    bias: vec![0.0; fan_out],
                    activation,
                }
            })
            .collect();
        let model = MlpModel {
            labels: schema.labels.clone(),
            encoding,
            normalization,
            layers,
        };
        model.validate()?;
        Ok(model)
    }
}

pub(crate) fn decide(output: &[f64], labels: usize) -> usize {
    if output.len() == 1 {
        return if labels == 2 {
            usize::from(output[0] > 0.5)
        } else {
            0
        };
    }
    let mut best = 0;
    for (i, &v) in output.iter().enumerate().skip(1) {
        if v > output[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
enum Slot {
    OneHot {
        feature: usize,
        position: Vec<Option<usize>>,
        width: usize,
    },
    Numeric {
        feature: usize,
        mean: f64,
        std: f64,
    },
}

/// An [`MlpModel`] bound to a schema, usable as a [`PredictionOracle`].
#[derive(Clone, Debug)]
pub struct MlpOracle {
    model: MlpModel,
    slots: Vec<Slot>,
}

impl MlpOracle {
    pub fn new(model: MlpModel, schema: &FeatureSchema) -> Result<Self> {
        model.validate()?;
        for label in &model.labels {
            if schema.label_index(label).is_none() {
                return Err(Error::Model(format!(
                    "model label `{label}` is not in the schema"
                )));
            }
        }
        let mut slots = Vec::with_capacity(model.encoding.len());
        let mut width = 0;
        for enc in &model.encoding {
            let feature = schema.feature_index(&enc.feature).ok_or_else(|| {
                Error::Model(format!("model input `{}` is not a schema feature", enc.feature))
            })?;
            let spec = &schema.features[feature];
            match (&enc.one_hot, &spec.kind) {
                (Some(order), FeatureKind::Categorical { values }) => {
                    let position = values.iter().map(|v| order.iter().position(|o| o == v)).collect();
                    slots.push(Slot::OneHot {
                        feature,
                        position,
                        width: order.len(),
                    });
                    width += order.len();
                }
                (None, FeatureKind::Continuous { .. }) => {
                    let norm = model
                        .normalization
                        .get(&enc.feature)
                        .copied()
                        .unwrap_or(Normalization { mean: 0.0, std: 1.0 });
                    slots.push(Slot::Numeric {
                        feature,
                        mean: norm.mean,
                        std: norm.std,
                    });
                    width += 1;
                }
                (Some(_), _) => {
                    return Err(Error::Model(format!(
                        "one-hot encoding on continuous feature `{}`",
                        enc.feature
                    )))
                }
                (None, _) => {
                    return Err(Error::Model(format!(
                        "categorical feature `{}` needs a one_hot value order",
                        enc.feature
                    )))
                }
            }
        }
        if width != model.input_width() {
            return Err(Error::Oracle(OracleError::Dimension {
                expected: model.input_width(),
                got: width,
            }));
        }
        Ok(MlpOracle { model, slots })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn into_model(self) -> MlpModel {
        self.model
    }

    pub fn encode(&self, row: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.model.input_width());
        for slot in &self.slots {
            match slot {
                Slot::OneHot {
                    feature,
                    position,
                    width,
                } => {
                    let start = x.len();
                    x.resize(start + width, 0.0);
                    if let Some(Some(p)) = position.get(row[*feature] as usize) {
                        x[start + p] = 1.0;
                    }
                }
                Slot::Numeric { feature, mean, std } => x.push((row[*feature] - mean) / std),
            }
        }
        x
    }

    /// Label index (into the model's labels) for a schema row.
    pub fn predict_row(&self, row: &[f64]) -> Result<usize, OracleError> {
        self.model.predict_encoded(&self.encode(row))
    }
}

impl PredictionOracle for MlpOracle {
    fn predict_batch(&self, samples: &[Sample]) -> Result<Vec<String>, OracleError> {
        samples
            .iter()
            .map(|s| {
                let row = s.features().ok_or(OracleError::UnsupportedInput("token"))?;
                Ok(self.model.labels[self.predict_row(row)?].clone())
            })
            .collect()
    }
}

//! Mini-batch gradient descent for [`MlpModel`] on cross-entropy loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{Activation, MlpModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub rng_seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 32,
            optimizer: Optimizer::Adam,
            rng_seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
    /// Mean loss over the last epoch, `None` with zero epochs.
    pub final_loss: Option<f64>,
}

/// Fraction of encoded inputs whose predicted label index equals the target.
pub fn accuracy(model: &MlpModel, inputs: &[Vec<f64>], targets: &[usize]) -> Result<f64> {
    if inputs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut hits = 0;
    for (x, &t) in inputs.iter().zip(targets) {
        hits += usize::from(model.predict_encoded(x)? == t);
    }
    Ok(hits as f64 / inputs.len() as f64)
}

/// How the final layer's output is turned into a loss.
#[derive(Clone, Copy, PartialEq)]
enum Head {
    /// Softmax over the outputs (applied here when the layer is linear).
    Categorical,
    /// One sigmoid unit for two labels.
    Binary,
}

fn head(model: &MlpModel) -> Result<Head> {
    let last = model.layers.last().expect("validated model has layers");
    match (last.activation, last.outputs()) {
        (Activation::Softmax | Activation::Identity, n) if n >= 2 => Ok(Head::Categorical),
        (Activation::Sigmoid, 1) if model.labels.len() == 2 => Ok(Head::Binary),
        (a, n) => Err(Error::Model(format!(
            "cannot train a {a:?} output layer with {n} unit(s) on cross-entropy"
        ))),
    }
}

/// Trains a copy of `initial` on encoded inputs with label-index targets.
///
/// Batches are reshuffled every epoch from a stream seeded by
/// `config.rng_seed`, so identical inputs give identical weights.
pub fn train_mlp(
    initial: &MlpModel,
    inputs: &[Vec<f64>],
    targets: &[usize],
    validation: Option<(&[Vec<f64>], &[usize])>,
    config: &TrainerConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    initial.validate()?;
    if inputs.is_empty() {
        return Err(Error::Model("training set is empty".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Model(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let width = initial.input_width();
    if let Some(x) = inputs.iter().find(|x| x.len() != width) {
        return Err(Error::Model(format!(
            "input of width {} for a {width}-input model",
            x.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= initial.labels.len()) {
        return Err(Error::Model(format!("target label index {t} out of range")));
    }
    let head = head(initial)?;

    let mut model = initial.clone();
    let mut state = OptimizerState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut final_loss = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = Gradients::zeros(&model);
            let mut loss = 0.0;
            for &i in batch {
                loss += backprop(&model, head, &inputs[i], targets[i], &mut grads);
            }
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += loss;
            grads.scale(1.0 / batch.len() as f64);
            state.step(&mut model, &grads, config);
        }
        final_loss = Some(epoch_loss / inputs.len() as f64);
    }

    Ok(TrainOutcome {
        train_accuracy: accuracy(&model, inputs, targets)?,
        validation_accuracy: validation.map(|(x, y)| accuracy(&model, x, y)).transpose()?,
        final_loss,
        model,
    })
}

struct Gradients {
    weights: Vec<Vec<Vec<f64>>>,
    bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(model: &MlpModel) -> Self {
        Gradients {
            weights: model
                .layers
                .iter()
                .map(|l| vec![vec![0.0; l.inputs()]; l.outputs()])
                .collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.outputs()]).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for w in self.weights.iter_mut().flatten().flatten() {
            *w *= s;
        }
        for b in self.bias.iter_mut().flatten() {
            *b *= s;
        }
    }
}

/// Adds one sample's gradient into `grads` and returns its loss.
fn backprop(model: &MlpModel, head: Head, x: &[f64], target: usize, grads: &mut Gradients) -> f64 {
    let n = model.layers.len();
    // acts[0] is the input, acts[l + 1] the output of layer l.
    let mut acts = Vec::with_capacity(n + 1);
    acts.push(x.to_vec());
    for (l, layer) in model.layers.iter().enumerate() {
        let mut z = layer.affine(&acts[l]);
        let activation = if l + 1 == n && head == Head::Categorical {
            Activation::Softmax
        } else {
            layer.activation
        };
        crate::oracle::activate(activation, &mut z);
        acts.push(z);
    }

    let out = &acts[n];
    let (loss, mut delta) = match head {
        Head::Categorical => {
            let loss = -(out[target] + 1e-300).ln();
            let mut d = out.clone();
            d[target] -= 1.0;
            (loss, d)
        }
        Head::Binary => {
            let p = out[0].clamp(1e-300, 1.0 - 1e-16);
            let y = if target == 1 { 1.0 } else { 0.0 };
            let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            (loss, vec![out[0] - y])
        }
    };

    for l in (0..n).rev() {
        let layer = &model.layers[l];
        let input = &acts[l];
        for (o, &d) in delta.iter().enumerate() {
            grads.bias[l][o] += d;
            for (g, &v) in grads.weights[l][o].iter_mut().zip(input) {
                *g += d * v;
            }
        }
        if l == 0 {
            break;
        }
        let below = &model.layers[l - 1];
        let a = &acts[l];
        delta = (0..layer.inputs())
            .map(|j| {
                let back: f64 = delta.iter().zip(&layer.weights).map(|(d, row)| d * row[j]).sum();
                back * derivative(below.activation, a[j])
            })
            .collect();
    }
    loss
}

/// Activation derivative expressed through the activation's output.
fn derivative(activation: Activation, a: f64) -> f64 {
    match activation {
        Activation::Relu => f64::from(u8::from(a > 0.0)),
        Activation::Sigmoid => a * (1.0 - a),
        Activation::Identity => 1.0,
        Activation::Softmax => unreachable!("softmax is only allowed on the final layer"),
    }
}

struct OptimizerState {
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl OptimizerState {
    fn new(model: &MlpModel) -> Self {
        OptimizerState {
            t: 0,
            m: Gradients::zeros(model),
            v: Gradients::zeros(model),
        }
    }

    fn step(&mut self, model: &mut MlpModel, g: &Gradients, config: &TrainerConfig) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let lr = config.learning_rate;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| match config.optimizer {
            Optimizer::Sgd => *p -= lr * g,
            Optimizer::Adam => {
                *m = B1 * *m + (1.0 - B1) * g;
                *v = B2 * *v + (1.0 - B2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
            }
        };
        for (l, layer) in model.layers.iter_mut().enumerate() {
            for (o, row) in layer.weights.iter_mut().enumerate() {
                for (i, w) in row.iter_mut().enumerate() {
                    update(
                        w,
                        g.weights[l][o][i],
                        &mut self.m.weights[l][o][i],
                        &mut self.v.weights[l][o][i],
                    );
                }
                update(
                    &mut layer.bias[o],
                    g.bias[l][o],
                    &mut self.m.bias[l][o],
                    &mut self.v.bias[l][o],
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, FeatureSpec};
    use crate::oracle::{Layer, MlpOracle};
    use rand::Rng;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                FeatureSpec::continuous("x", -1.0, 1.0, false, true),
                FeatureSpec::continuous("y", -1.0, 1.0, false, false),
            ],
            &["0", "1"],
            "1",
        )
        .unwrap()
    }

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        while xs.len() < n {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if (a + b).abs() < 0.1 {
                continue;
            }
            xs.push(vec![a, b]);
            ys.push(usize::from(a + b > 0.0));
        }
        (xs, ys)
    }

    fn initial(hidden: &[usize]) -> MlpModel {
        MlpModel::initialize(
            &schema(),
            hidden,
            Activation::Relu,
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap()
    }

    #[test]
    fn learns_separable_data() {
        let (x, y) = separable(400, 1);
        let cfg = TrainerConfig {
            epochs: 30,
            ..TrainerConfig::default()
        };
        let out = train_mlp(&initial(&[8]), &x, &y, None, &cfg).unwrap();
        assert!(out.train_accuracy >= 0.95, "{}", out.train_accuracy);
    }

    #[test]
    fn sgd_and_sigmoid_head() {
        let (x, y) = separable(400, 2);
        let mut model = initial(&[]);
        model.layers = vec![Layer {
            weights: vec![vec![0.0, 0.0]],
            bias: vec![0.0],
            activation: Activation::Sigmoid,
        }];
        let cfg = TrainerConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 0.5,
            epochs: 30,
            ..TrainerConfig::default()
        };
        let out = train_mlp(&model, &x, &y, Some((&x, &y)), &cfg).unwrap();
        assert!(out.train_accuracy >= 0.95);
        assert_eq!(out.validation_accuracy, Some(out.train_accuracy));
    }

    #[test]
    fn zero_epochs_is_identity() {
        let (x, y) = separable(20, 3);
        let m = initial(&[4]);
        let cfg = TrainerConfig {
            epochs: 0,
            ..TrainerConfig::default()
        };
        let out = train_mlp(&m, &x, &y, None, &cfg).unwrap();
        assert_eq!(out.model, m);
        assert_eq!(out.final_loss, None);
    }

    #[test]
    fn single_class_gives_constant_predictor() {
        let (x, _) = separable(100, 4);
        let y = vec![1; x.len()];
        let out = train_mlp(&initial(&[4]), &x, &y, None, &TrainerConfig::default()).unwrap();
        assert_eq!(out.train_accuracy, 1.0);
    }

    #[test]
    fn reproducible() {
        let (x, y) = separable(200, 5);
        let cfg = TrainerConfig {
            epochs: 3,
            ..TrainerConfig::default()
        };
        let a = train_mlp(&initial(&[6]), &x, &y, None, &cfg).unwrap();
        let b = train_mlp(&initial(&[6]), &x, &y, None, &cfg).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = separable(1, 6);
        let model = MlpModel::initialize(
            &schema(),
            &[3],
            Activation::Sigmoid,
            &mut ChaCha8Rng::seed_from_u64(9),
        )
        .unwrap();
        let head = head(&model).unwrap();
        let mut g = Gradients::zeros(&model);
        backprop(&model, head, &x[0], y[0], &mut g);
        let loss = |m: &MlpModel| {
            let p = m.forward(&x[0]);
            -p[y[0]].ln()
        };
        let h = 1e-6;
        for l in 0..model.layers.len() {
            for o in 0..model.layers[l].outputs() {
                for i in 0..model.layers[l].inputs() {
                    let mut plus = model.clone();
                    plus.layers[l].weights[o][i] += h;
                    let mut minus = model.clone();
                    minus.layers[l].weights[o][i] -= h;
                    let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    assert!((numeric - g.weights[l][o][i]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn exploding_rate_reports_non_finite_loss() {
        let (x, y) = separable(64, 7);
        let x: Vec<Vec<f64>> = x
            .into_iter()
            .map(|v| v.iter().map(|a| a * 1e300).collect())
            .collect();
        let cfg = TrainerConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 1e300,
            ..TrainerConfig::default()
        };
        let err = train_mlp(&initial(&[4]), &x, &y, None, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }), "{err}");
    }

    #[test]
    fn trained_model_drives_the_oracle() {
        let (x, y) = separable(300, 8);
        let out = train_mlp(&initial(&[8]), &x, &y, None, &TrainerConfig::default()).unwrap();
        let oracle = MlpOracle::new(out.model, &schema()).unwrap();
        let hits = x
            .iter()
            .zip(&y)
            .filter(|(row, &t)| oracle.predict_row(row).unwrap() == t)
            .count();
        assert!(hits as f64 / x.len() as f64 >= 0.95);
    }
}

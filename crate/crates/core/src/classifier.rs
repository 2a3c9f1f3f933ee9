//! Room classifier: a fully connected network with a softmax head, trained with minibatch Adam
//! on mean cross-entropy for a fixed number of epochs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy, softmax_cross_entropy_grad, Activation, AdamConfig, AdamState, Matrix,
    MlpParams, OutputGrad, Reduction, SeededRng,
};
use crate::scalar::Scalar;

/// Number of weight layers, counting the softmax output layer.
pub const LAYER_COUNT: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Widths of the hidden layers; there must be `LAYER_COUNT - 1` of them.
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 32, 32, 16],
            hidden_activation: Activation::Relu,
            // Few passes on purpose: with a fixed epoch budget, small training sets get few
            // updates, which is what makes scarce real data hurt and extra rows help.
            epochs: 3,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.len() != LAYER_COUNT - 1 {
            return Err(Error::config(format!(
                "classifier needs {} hidden widths ({LAYER_COUNT} layers), got {}",
                LAYER_COUNT - 1,
                self.hidden.len()
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("classifier batch_size must be positive"));
        }
        if matches!(self.hidden_activation, Activation::Softmax) {
            return Err(Error::config(
                "softmax is only valid as the output activation",
            ));
        }
        self.hidden_activation.validate()?;
        self.adam.validate()
    }

    pub fn init<S: Scalar>(
        &self,
        features: usize,
        classes: usize,
        rng: &mut SeededRng,
    ) -> Result<MlpParams<S>> {
        self.validate()?;
        let mut dims = vec![features];
        dims.extend(&self.hidden);
        dims.push(classes);
        let mut acts = vec![self.hidden_activation; self.hidden.len()];
        acts.push(Activation::Softmax);
        MlpParams::init(&dims, &acts, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier<S: Scalar> {
    pub params: MlpParams<S>,
    /// Mean minibatch loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Trains on every sample of `train` (features assumed standardized).
///
/// Each epoch visits the samples in a fresh random order, in batches of `batch_size` (the last
/// batch may be smaller).
pub fn train_classifier<S: Scalar>(
    train: &Dataset,
    cfg: &ClassifierConfig,
) -> Result<TrainedClassifier<S>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::data("cannot train a classifier on an empty dataset"));
    }
    let root = SeededRng::new(cfg.seed);
    let mut params = cfg.init::<S>(
        train.feature_count(),
        train.class_count(),
        &mut root.derive(1),
    )?;
    let mut order_rng = root.derive(2);
    let x = train.features::<S>();
    let y = train.one_hot_labels::<S>();
    let mut adam = AdamState::new(&params, cfg.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select_rows(chunk);
            let yb = y.select_rows(chunk);
            let cache = params.forward(&xb)?;
            let loss = cross_entropy(cache.output(), &yb, Reduction::Mean)
                .map_err(|e| nan_abort(epoch, batch_no, e.to_string()))?;
            if !loss.is_finite() {
                return Err(nan_abort(epoch, batch_no, "non-finite loss".into()));
            }
            let g = softmax_cross_entropy_grad(cache.output(), &yb, Reduction::Mean)?;
            let (grads, _) = params.backward(&cache, OutputGrad::PreActivation(g))?;
            adam.step(&mut params, &grads)
                .map_err(|e| nan_abort(epoch, batch_no, e.to_string()))?;
            total += loss.to_f64_lossy();
            batches += 1;
        }
        loss_trace.push(total / batches as f64);
    }
    Ok(TrainedClassifier { params, loss_trace })
}

fn nan_abort(epoch: usize, batch: usize, msg: String) -> Error {
    Error::Training(format!(
        "classifier diverged at epoch {epoch}, batch {batch}: {msg}"
    ))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<S> {
    pub probabilities: Matrix<S>,
    /// 1-based class labels.
    pub labels: Vec<usize>,
}

pub fn predict<S: Scalar>(params: &MlpParams<S>, x: &Matrix<S>) -> Result<Prediction<S>> {
    let probabilities = params.predict(x)?;
    let labels = probabilities.iter_rows().map(|r| argmax(r) + 1).collect();
    Ok(Prediction {
        probabilities,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    /// Percentage of correctly classified samples, in `[0, 100]`.
    pub accuracy: f64,
    /// Mean cross-entropy.
    pub log_loss: f64,
    /// `confusion[true - 1][predicted - 1]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate<S: Scalar>(params: &MlpParams<S>, test: &Dataset) -> Result<EvalResult> {
    if test.is_empty() {
        return Err(Error::data("cannot evaluate on an empty dataset"));
    }
    if params.output_dim() != test.class_count() {
        return Err(Error::shape(format!(
            "classifier has {} outputs, test data {} classes",
            params.output_dim(),
            test.class_count()
        )));
    }
    let pred = predict(params, &test.features::<S>())?;
    let log_loss = cross_entropy(
        &pred.probabilities,
        &test.one_hot_labels::<S>(),
        Reduction::Mean,
    )?;
    let k = test.class_count();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0usize;
    for (truth, &guess) in test.labels().into_iter().zip(&pred.labels) {
        confusion[truth - 1][guess - 1] += 1;
        if truth == guess {
            correct += 1;
        }
    }
    Ok(EvalResult {
        accuracy: 100.0 * correct as f64 / test.len() as f64,
        log_loss: log_loss.to_f64_lossy(),
        confusion,
    })
}

impl EvalResult {
    /// Two-line CSV: `accuracy,log_loss` followed by one `confusion_T_P` column per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["accuracy".to_string(), "log_loss".to_string()];
        let mut row = vec![
            format!("{:.6}", self.accuracy),
            format!("{:.6}", self.log_loss),
        ];
        for (t, counts) in self.confusion.iter().enumerate() {
            for (p, c) in counts.iter().enumerate() {
                header.push(format!("confusion_{}_{}", t + 1, p + 1));
                row.push(c.to_string());
            }
        }
        w.write_record(&header)?;
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}

pub fn save_classifier<S: Scalar>(params: &MlpParams<S>, path: &Path) -> Result<()> {
    crate::nn::save_params(params, path)
}

pub fn load_classifier<S: Scalar>(path: &Path) -> Result<MlpParams<S>> {
    let params: MlpParams<S> = crate::nn::load_params(path)?;
    if params.layers().len() != LAYER_COUNT
        || params.layers().last().map(|l| l.activation) != Some(Activation::Softmax)
    {
        return Err(Error::ModelFormat(format!(
            "{}: not a {LAYER_COUNT}-layer softmax classifier",
            path.display()
        )));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RssSample;
    use crate::nn::DenseLayer;

    fn toy(n_per_class: usize, seed: u64) -> Dataset {
        // four well separated clusters in 2-D
        let centres = [(-3.0, -3.0), (3.0, -3.0), (-3.0, 3.0), (3.0, 3.0)];
        let mut rng = SeededRng::new(seed);
        let mut samples = Vec::new();
        for (c, &(cx, cy)) in centres.iter().enumerate() {
            let noise = rng.sample_normal::<f64>(n_per_class, 2);
            for r in noise.iter_rows() {
                samples.push(RssSample {
                    index: samples.len(),
                    rss: vec![cx + 0.3 * r[0], cy + 0.3 * r[1]],
                    label: c + 1,
                });
            }
        }
        Dataset::new(samples, 4).unwrap()
    }

    #[test]
    fn separable_clusters_are_learned() {
        let cfg = ClassifierConfig {
            epochs: 60,
            batch_size: 16,
            seed: 3,
            ..ClassifierConfig::default()
        };
        let trained = train_classifier::<f64>(&toy(40, 1), &cfg).unwrap();
        let eval = evaluate(&trained.params, &toy(40, 2)).unwrap();
        assert!(eval.accuracy >= 99.0, "{eval:?}");
        assert!(trained.loss_trace.last() < trained.loss_trace.first());
    }

    #[test]
    fn one_dimensional_threshold_is_fit_exactly() {
        // x < 0 → class 1, x > 0 → class 2
        let mut rng = SeededRng::new(8);
        let samples: Vec<RssSample> = (0..100)
            .map(|i| {
                let mut x = rng.uniform(0.05, 2.0);
                if i % 2 == 0 {
                    x = -x;
                }
                RssSample {
                    index: i,
                    rss: vec![x],
                    label: if x < 0.0 { 1 } else { 2 },
                }
            })
            .collect();
        let ds = Dataset::new(samples, 2).unwrap();
        let cfg = ClassifierConfig {
            epochs: 200,
            seed: 2,
            ..ClassifierConfig::default()
        };
        let trained = train_classifier::<f64>(&ds, &cfg).unwrap();
        assert_eq!(trained.loss_trace.len(), 200);
        assert_eq!(evaluate(&trained.params, &ds).unwrap().accuracy, 100.0);
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let cfg = ClassifierConfig {
            epochs: 0,
            seed: 9,
            ..ClassifierConfig::default()
        };
        let trained = train_classifier::<f64>(&toy(5, 0), &cfg).unwrap();
        assert!(trained.loss_trace.is_empty());
        let fresh = cfg
            .init::<f64>(2, 4, &mut SeededRng::new(9).derive(1))
            .unwrap();
        assert_eq!(trained.params, fresh);
    }

    #[test]
    fn layer_count_is_enforced() {
        let cfg = ClassifierConfig {
            hidden: vec![8, 8],
            ..ClassifierConfig::default()
        };
        assert!(cfg.validate().is_err());
        let net = ClassifierConfig::default()
            .init::<f64>(7, 4, &mut SeededRng::new(0))
            .unwrap();
        assert_eq!(net.dims(), vec![7, 64, 64, 32, 32, 16, 4]);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 1.0]), 3);
    }

    /// Classifier whose softmax is uniform for every input.
    fn uniform_net(features: usize) -> MlpParams<f64> {
        let mut layers = Vec::new();
        let mut d = features;
        for _ in 0..LAYER_COUNT - 1 {
            layers.push(
                DenseLayer::new(Matrix::zeros(d, 3), vec![0.0; 3], Activation::Relu).unwrap(),
            );
            d = 3;
        }
        layers
            .push(DenseLayer::new(Matrix::zeros(3, 4), vec![0.0; 4], Activation::Softmax).unwrap());
        MlpParams::new(layers).unwrap()
    }

    #[test]
    fn uniform_predictor_has_ln4_loss_and_predicts_room_one() {
        let test = toy(10, 4);
        let eval = evaluate(&uniform_net(2), &test).unwrap();
        assert!((eval.log_loss - 4f64.ln()).abs() < 1e-12);
        assert!((eval.accuracy - 25.0).abs() < 1e-12);
        assert!(eval
            .confusion
            .iter()
            .all(|row| row[0] == 10 && row[1..].iter().all(|&c| c == 0)));
    }

    #[test]
    fn accuracy_arithmetic() {
        // 620 of 1000 correct → 62.0 %
        assert_eq!(100.0 * 620.0 / 1000.0, 62.0);
        let test = toy(250, 5);
        let net = uniform_net(2);
        let eval = evaluate(&net, &test).unwrap();
        let total: usize = eval.confusion.iter().flatten().sum();
        let diag: usize = (0..4).map(|i| eval.confusion[i][i]).sum();
        assert_eq!(total, 1000);
        assert_eq!(100.0 * diag as f64 / total as f64, eval.accuracy);
    }

    #[test]
    fn sample_order_does_not_change_evaluation() {
        let cfg = ClassifierConfig {
            epochs: 3,
            ..ClassifierConfig::default()
        };
        let net = train_classifier::<f64>(&toy(20, 1), &cfg).unwrap().params;
        let test = toy(20, 7);
        let mut reversed: Vec<RssSample> = test.samples().to_vec();
        reversed.reverse();
        let reversed = Dataset::new(reversed, 4).unwrap();
        let a = evaluate(&net, &test).unwrap();
        let b = evaluate(&net, &reversed).unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.confusion, b.confusion);
        assert!((a.log_loss - b.log_loss).abs() < 1e-12);
    }

    #[test]
    fn eval_csv_layout() {
        let eval = EvalResult {
            accuracy: 62.0,
            log_loss: 0.5,
            confusion: vec![vec![1, 0], vec![0, 1]],
        };
        let mut buf = Vec::new();
        eval.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "accuracy,log_loss,confusion_1_1,confusion_1_2,confusion_2_1,confusion_2_2\n\
             62.000000,0.500000,1,0,0,1\n"
        );
    }

    #[test]
    fn f32_training_runs() {
        let cfg = ClassifierConfig {
            epochs: 20,
            seed: 1,
            ..ClassifierConfig::default()
        };
        let trained = train_classifier::<f32>(&toy(30, 1), &cfg).unwrap();
        assert!(evaluate(&trained.params, &toy(30, 2)).unwrap().accuracy > 90.0);
    }
}

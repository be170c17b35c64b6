//! The MNIST classifier: an ELU multilayer perceptron with ten sigmoid
//! outputs, trained on half squared error, plus activation recording.

mod records;

pub use records::{half_squared_error, ActivationRecord, ActivationRecords};

use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, INPUT_WIDTH, NUM_CLASSES};
use crate::engine::{
    self, adam_step, backward_batch, forward_batch, half_mse, Activation, AdamState, CycleSummary,
    FitReport, Mode, NetworkSpec, Params, TrainConfig, Trainable,
};
use crate::{Error, Result};

/// Rows pushed through the network at once when evaluating.
pub(crate) const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// 6 x 128 ELU, fast enough for a laptop.
    Desk,
    /// 12 x 200 ELU.
    Paper,
}

impl Architecture {
    pub fn hidden_widths(self) -> Vec<usize> {
        match self {
            Architecture::Desk => vec![128; 6],
            Architecture::Paper => vec![200; 12],
        }
    }

    pub fn spec(self, dropout_keep: f64) -> Result<NetworkSpec> {
        NetworkSpec::mlp(
            INPUT_WIDTH,
            &self.hidden_widths(),
            Activation::Elu,
            NUM_CLASSES,
            Activation::Sigmoid,
            dropout_keep,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub cycle: usize,
    pub train_error: f64,
    pub validation_error: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub spec: NetworkSpec,
    pub params: Params<f32>,
    pub history: Vec<HistoryEntry>,
}

impl ClassifierModel {
    pub fn new(spec: NetworkSpec, params: Params<f32>) -> Result<Self> {
        check_classifier_spec(&spec)?;
        params.check_shapes(&spec)?;
        Ok(ClassifierModel {
            spec,
            params,
            history: Vec::new(),
        })
    }

    pub fn hidden_width(&self) -> usize {
        self.spec.hidden_total()
    }

    /// Eval-mode outputs for every row of `x`.
    pub fn predict(&self, x: ArrayView2<f32>) -> Result<Array2<f32>> {
        let mut out = Array2::zeros((x.nrows(), self.spec.output_width()));
        for start in (0..x.nrows()).step_by(EVAL_CHUNK) {
            let end = (start + EVAL_CHUNK).min(x.nrows());
            let y = engine::predict_batch(&self.spec, &self.params, x.slice(s![start..end, ..]))?;
            out.slice_mut(s![start..end, ..]).assign(&y);
        }
        Ok(out)
    }

    pub fn predict_labels(&self, x: ArrayView2<f32>) -> Result<Vec<usize>> {
        let y = self.predict(x)?;
        Ok(y.rows().into_iter().map(|r| argmax(r.as_slice().unwrap())).collect())
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let labels = self.predict_labels(data.inputs().view())?;
        let hits = labels
            .iter()
            .zip(data.labels())
            .filter(|(p, &l)| **p == l as usize)
            .count();
        Ok(hits as f64 / data.len() as f64)
    }

    /// Mean half squared error over `data`.
    pub fn mean_error(&self, data: &Dataset) -> Result<f64> {
        let y = self.predict(data.inputs().view())?;
        let total: f64 = y
            .rows()
            .into_iter()
            .zip(data.labels())
            .map(|(r, &l)| half_squared_error(r, l as usize))
            .sum();
        Ok(total / data.len().max(1) as f64)
    }
}

fn check_classifier_spec(spec: &NetworkSpec) -> Result<()> {
    spec.validate()?;
    let out = spec.layers.last().expect("validated non-empty");
    if out.output_width != NUM_CLASSES || out.activation != Activation::Sigmoid {
        return Err(Error::InvalidSpec(
            "a classifier ends in 10 sigmoid units".into(),
        ));
    }
    if spec.layers.len() < 2 {
        return Err(Error::InvalidSpec("a classifier needs a hidden layer".into()));
    }
    if spec.layers[..spec.layers.len() - 1]
        .iter()
        .any(|l| l.activation != Activation::Elu)
    {
        return Err(Error::InvalidSpec("classifier hidden layers are ELU".into()));
    }
    Ok(())
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode label and outputs for one input.
pub fn classify(model: &ClassifierModel, x: &[f32]) -> Result<(usize, Vec<f32>)> {
    let (y, _) = engine::forward(&model.spec, &model.params, x, Mode::Eval)?;
    Ok((argmax(&y), y))
}

/// Eval-mode activation records for every sample of `data`.
pub fn record_activations(model: &ClassifierModel, data: &Dataset) -> Result<ActivationRecords> {
    record_rows(model, data.inputs().view(), data.labels(), None)
}

pub(crate) fn record_rows(
    model: &ClassifierModel,
    inputs: ArrayView2<f32>,
    labels: &[u8],
    cycle: Option<usize>,
) -> Result<ActivationRecords> {
    if inputs.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} inputs but {} labels",
            inputs.nrows(),
            labels.len()
        )));
    }
    let n = inputs.nrows();
    let mut hidden = Array2::zeros((n, model.hidden_width()));
    let mut outputs = Array2::zeros((n, model.spec.output_width()));
    for start in (0..n).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(n);
        let trace = forward_batch(
            &model.spec,
            &model.params,
            inputs.slice(s![start..end, ..]),
            Mode::Eval,
        )?;
        hidden
            .slice_mut(s![start..end, ..])
            .assign(&trace.hidden_concat());
        outputs.slice_mut(s![start..end, ..]).assign(trace.output());
    }
    let errors = outputs
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(r, &l)| half_squared_error(r, l as usize))
        .collect();
    Ok(ActivationRecords {
        sample_ids: (0..n).collect(),
        hidden,
        labels: labels.to_vec(),
        outputs,
        errors,
        cycles: vec![cycle; n],
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifierData<'a> {
    pub train: &'a Dataset,
    pub validation: &'a Dataset,
    /// Scored at every cycle end for the history, if present.
    pub test: Option<&'a Dataset>,
}

/// Per-minibatch input noise with `sigma ~ U(0, sigma_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseInjection {
    pub sigma_max: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub model: ClassifierModel,
    pub report: FitReport,
    /// Eval-mode records of the probe set taken at every cycle end.
    pub snapshots: Option<ActivationRecords>,
}

struct Objective<'a> {
    model: ClassifierModel,
    adam: AdamState<f32>,
    config: &'a TrainConfig,
    data: ClassifierData<'a>,
    noise: Option<(f64, ChaCha8Rng)>,
    probe: Option<&'a Dataset>,
    snapshots: Option<ActivationRecords>,
}

impl Trainable for Objective<'_> {
    fn sample_count(&self) -> usize {
        self.data.train.len()
    }

    fn step(&mut self, batch: &[usize], lr: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let mut x = self.data.train.batch_inputs(batch);
        if let Some((sigma_max, noise_rng)) = &mut self.noise {
            let sigma = noise_rng.random::<f64>() * *sigma_max;
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).expect("sigma is positive");
                x.mapv_inplace(|v| v + normal.sample(noise_rng) as f32);
            }
        }
        let t = self.data.train.batch_targets(batch);
        let spec = &self.model.spec;
        let diverged = Error::Diverged { iteration: 0 };
        let trace = match forward_batch(spec, &self.model.params, x.view(), Mode::Train(rng)) {
            Ok(t) => t,
            Err(Error::NumericOverflow { .. }) => return Err(diverged),
            Err(e) => return Err(e),
        };
        let (loss, d_out) = half_mse(trace.output().view(), t.view());
        if !loss.is_finite() {
            return Err(diverged);
        }
        let (grads, _) = backward_batch(spec, &self.model.params, &trace, d_out.view())?;
        if !grads.is_finite() {
            return Err(diverged);
        }
        adam_step(
            &mut self.model.params,
            &grads,
            &mut self.adam,
            lr,
            &self.config.adam,
        );
        Ok(loss)
    }

    fn validation_error(&mut self) -> Result<f64> {
        self.model.mean_error(self.data.validation)
    }

    fn end_of_cycle(&mut self, summary: &CycleSummary) -> Result<()> {
        let test_accuracy = match self.data.test {
            Some(t) => Some(self.model.accuracy(t)?),
            None => None,
        };
        self.model.history.push(HistoryEntry {
            cycle: summary.cycle,
            train_error: summary.train_error,
            validation_error: summary.validation_error,
            test_accuracy,
        });
        if let Some(probe) = self.probe {
            let snap = record_rows(
                &self.model,
                probe.inputs().view(),
                probe.labels(),
                Some(summary.cycle),
            )?;
            match &mut self.snapshots {
                Some(all) => all.append(snap)?,
                None => self.snapshots = Some(snap),
            }
        }
        Ok(())
    }
}

/// Minibatch Adam with the cyclic schedule and cycle-end early stopping.
pub fn train_classifier(
    spec: NetworkSpec,
    data: ClassifierData<'_>,
    config: &TrainConfig,
    snapshot_probe: Option<&Dataset>,
) -> Result<TrainedClassifier> {
    train_classifier_with(spec, data, config, snapshot_probe, None)
}

/// As [`train_classifier`], optionally adding seeded input noise to every
/// minibatch. Noise draws use their own generator stream, so the dropout and
/// shuffling streams are unaffected by whether noise is on.
pub fn train_classifier_with(
    spec: NetworkSpec,
    data: ClassifierData<'_>,
    config: &TrainConfig,
    snapshot_probe: Option<&Dataset>,
    noise: Option<NoiseInjection>,
) -> Result<TrainedClassifier> {
    config.validate()?;
    let spec = spec.with_dropout_keep(config.dropout_keep)?;
    check_classifier_spec(&spec)?;
    if data.validation.is_empty() {
        return Err(Error::InvalidInput("validation set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = Params::init(&spec, &mut rng);
    let noise = match noise {
        Some(n) if !(n.sigma_max >= 0.0 && n.sigma_max.is_finite()) => {
            return Err(Error::InvalidConfig(format!(
                "noise sigma_max must be non-negative, got {}",
                n.sigma_max
            )))
        }
        Some(n) => {
            let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
            noise_rng.set_stream(1);
            Some((n.sigma_max, noise_rng))
        }
        None => None,
    };
    let mut objective = Objective {
        adam: AdamState::new(&spec),
        model: ClassifierModel {
            spec,
            params,
            history: Vec::new(),
        },
        config,
        data,
        noise,
        probe: snapshot_probe,
        snapshots: None,
    };
    let report = engine::fit(&mut objective, config, &mut rng)?;
    Ok(TrainedClassifier {
        model: objective.model,
        report,
        snapshots: objective.snapshots,
    })
}

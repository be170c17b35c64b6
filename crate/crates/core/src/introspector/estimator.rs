use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{tower, AutoencoderModel, LatentPoint, LATENT_DIM};
use crate::classifier::ActivationRecords;
use crate::engine::{
    adam_step, backward_batch, fit, forward_batch, half_mse, AdamState, CycleSummary, FitReport,
    Mode, Network, TrainConfig, Trainable,
};
use crate::{Error, Result};

pub const DEFAULT_TARGET_FLOOR: f64 = 1e-8;
pub const DEFAULT_ESTIMATOR_BATCH: usize = 32;

const CHUNK: usize = 1024;

/// Regressor from a latent point to the log10 of the classifier error.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorModel {
    pub network: Network<f32>,
    /// Added to the error before taking log10, so that `e = 0` stays finite.
    pub target_floor: f64,
    pub history: Vec<CycleSummary>,
}

/// Higher means the activation pattern looks more like well-classified ones.
pub fn confidence(e_log10: f64) -> f64 {
    -e_log10
}

impl EstimatorModel {
    pub fn new(network: Network<f32>, target_floor: f64) -> Result<Self> {
        let spec = &network.spec;
        if spec.input_width() != LATENT_DIM || spec.output_width() != 1 {
            return Err(Error::InvalidSpec(
                "estimator maps a latent point to a single value".into(),
            ));
        }
        if !(target_floor > 0.0 && target_floor.is_finite()) {
            return Err(Error::InvalidConfig("target_floor must be positive".into()));
        }
        Ok(EstimatorModel {
            network,
            target_floor,
            history: Vec::new(),
        })
    }

    pub fn target(&self, e: f64) -> f64 {
        (e + self.target_floor).log10()
    }

    pub fn estimate_batch(&self, z: ArrayView2<f32>) -> Result<Array1<f64>> {
        let y = self.network.predict(z, CHUNK)?;
        Ok(y.column(0).mapv(|v| v as f64))
    }

    pub fn estimate_points(&self, z: &[LatentPoint]) -> Result<Vec<f64>> {
        let rows = LatentPoint::to_rows(z).mapv(|v| v as f32);
        Ok(self.estimate_batch(rows.view())?.to_vec())
    }

    /// Estimated log10 error at `z`.
    pub fn estimate(&self, z: LatentPoint) -> Result<f64> {
        Ok(self.estimate_points(&[z])?[0])
    }

    pub fn confidence(&self, z: LatentPoint) -> Result<f64> {
        Ok(confidence(self.estimate(z)?))
    }
}

#[derive(Debug, Clone)]
pub struct TrainedEstimator {
    pub model: EstimatorModel,
    pub report: FitReport,
}

struct Pairs {
    z: Array2<f32>,
    target: Array2<f32>,
}

impl Pairs {
    fn new(ae: &AutoencoderModel, records: &ActivationRecords, floor: f64) -> Result<Self> {
        let z = ae.encode_batch(records.hidden.view())?;
        let target = Array2::from_shape_fn((records.len(), 1), |(i, _)| {
            (records.errors[i] + floor).log10() as f32
        });
        Ok(Pairs { z, target })
    }
}

struct Objective<'a> {
    model: EstimatorModel,
    adam: AdamState<f32>,
    config: &'a TrainConfig,
    train: Pairs,
    validation: Pairs,
}

impl Trainable for Objective<'_> {
    fn sample_count(&self) -> usize {
        self.train.z.nrows()
    }

    fn step(&mut self, batch: &[usize], lr: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let diverged = || Error::Diverged { iteration: 0 };
        let x = self.train.z.select(Axis(0), batch);
        let t = self.train.target.select(Axis(0), batch);
        let net = &self.model.network;
        let trace = forward_batch(&net.spec, &net.params, x.view(), Mode::Train(rng))
            .map_err(|e| match e {
                Error::NumericOverflow { .. } => diverged(),
                e => e,
            })?;
        let (loss, d_out) = half_mse(trace.output().view(), t.view());
        let (grads, _) = backward_batch(&net.spec, &net.params, &trace, d_out.view())?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(diverged());
        }
        adam_step(
            &mut self.model.network.params,
            &grads,
            &mut self.adam,
            lr,
            &self.config.adam,
        );
        Ok(loss)
    }

    fn validation_error(&mut self) -> Result<f64> {
        let y = self.model.network.predict(self.validation.z.view(), CHUNK)?;
        Ok(half_mse(y.view(), self.validation.target.view()).0)
    }

    fn end_of_cycle(&mut self, summary: &CycleSummary) -> Result<()> {
        self.model.history.push(*summary);
        Ok(())
    }
}

/// Fits the estimator to `(encode(h), log10(e + target_floor))` pairs.
///
/// The autoencoder is only borrowed, and latents are computed once up front,
/// so no gradient can reach it or the classifier that produced the records.
pub fn train_estimator(
    ae: &AutoencoderModel,
    train: &ActivationRecords,
    validation: &ActivationRecords,
    config: &TrainConfig,
    target_floor: f64,
) -> Result<TrainedEstimator> {
    config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::InvalidInput(
            "estimator needs training and validation records".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let network = Network::init(tower(LATENT_DIM, 1, config.dropout_keep)?, &mut rng);
    let model = EstimatorModel::new(network, target_floor)?;
    let mut objective = Objective {
        adam: AdamState::new(&model.network.spec),
        train: Pairs::new(ae, train, target_floor)?,
        validation: Pairs::new(ae, validation, target_floor)?,
        model,
        config,
    };
    let report = fit(&mut objective, config, &mut rng)?;
    Ok(TrainedEstimator {
        model: objective.model,
        report,
    })
}

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{mmd_sq_rows, mmd_sq_with_grad, prior_samples, tower, LatentPoint};
use crate::classifier::ActivationRecords;
use crate::engine::{
    adam_step, backward_batch, fit, forward_batch, half_mse, AdamState, CycleSummary, FitReport,
    Mode, Network, TrainConfig, Trainable,
};
use crate::{Error, Result};

pub const LATENT_DIM: usize = 2;
/// Weight of the MMD term. The reconstruction term sums over every unit, so
/// the prior match needs a large multiplier to stay in the same range.
pub const DEFAULT_MMD_WEIGHT: f64 = 1000.0;

const CHUNK: usize = 1024;
/// Latents scored against the prior when computing the validation loss.
const VALIDATION_MMD_POINTS: usize = 1024;
const STD_FLOOR: f32 = 1e-6;

/// Deterministic encoder/decoder pair over standardized activations.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: Network<f32>,
    pub decoder: Network<f32>,
    pub mmd_weight: f64,
    /// Per-unit training statistics; `h` is encoded as `(h - mean) / std`.
    pub mean: Array1<f32>,
    pub std: Array1<f32>,
    pub history: Vec<CycleSummary>,
}

impl AutoencoderModel {
    pub fn new(
        encoder: Network<f32>,
        decoder: Network<f32>,
        mmd_weight: f64,
        mean: Array1<f32>,
        std: Array1<f32>,
    ) -> Result<Self> {
        let width = encoder.spec.input_width();
        if encoder.spec.output_width() != LATENT_DIM || decoder.spec.input_width() != LATENT_DIM {
            return Err(Error::InvalidSpec(format!(
                "bottleneck must have width {LATENT_DIM}"
            )));
        }
        if decoder.spec.output_width() != width {
            return Err(Error::InvalidSpec(format!(
                "decoder output {} does not match encoder input {width}",
                decoder.spec.output_width()
            )));
        }
        if mean.len() != width || std.len() != width {
            return Err(Error::Shape(format!(
                "standardization vectors must have length {width}"
            )));
        }
        if std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("std entries must be positive".into()));
        }
        if !(mmd_weight >= 0.0 && mmd_weight.is_finite()) {
            return Err(Error::InvalidConfig("mmd_weight must be non-negative".into()));
        }
        Ok(AutoencoderModel {
            encoder,
            decoder,
            mmd_weight,
            mean,
            std,
            history: Vec::new(),
        })
    }

    /// Fresh He-initialized towers for activations of width `hidden_width`.
    pub fn init(
        hidden_width: usize,
        mmd_weight: f64,
        mean: Array1<f32>,
        std: Array1<f32>,
        dropout_keep: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let encoder = Network::init(tower(hidden_width, LATENT_DIM, dropout_keep)?, rng);
        let decoder = Network::init(tower(LATENT_DIM, hidden_width, dropout_keep)?, rng);
        Self::new(encoder, decoder, mmd_weight, mean, std)
    }

    pub fn input_width(&self) -> usize {
        self.encoder.spec.input_width()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.input_width() {
            return Err(Error::Shape(format!(
                "activation width {width} does not match autoencoder input {}",
                self.input_width()
            )));
        }
        Ok(())
    }

    pub fn standardize(&self, h: ArrayView2<f32>) -> Result<Array2<f32>> {
        self.check_width(h.ncols())?;
        Ok((&h - &self.mean) / &self.std)
    }

    pub fn destandardize(&self, h: ArrayView2<f32>) -> Result<Array2<f32>> {
        self.check_width(h.ncols())?;
        Ok(&h * &self.std + &self.mean)
    }

    /// Latent rows for raw activation rows.
    pub fn encode_batch(&self, h: ArrayView2<f32>) -> Result<Array2<f32>> {
        self.check_width(h.ncols())?;
        let mut out = Array2::zeros((h.nrows(), LATENT_DIM));
        for start in (0..h.nrows()).step_by(CHUNK) {
            let end = (start + CHUNK).min(h.nrows());
            let x = self.standardize(h.slice(s![start..end, ..]))?;
            let z = self.encoder.predict(x.view(), CHUNK)?;
            out.slice_mut(s![start..end, ..]).assign(&z);
        }
        Ok(out)
    }

    pub fn encode(&self, h: ArrayView1<f32>) -> Result<LatentPoint> {
        let z = self.encode_batch(h.insert_axis(Axis(0)))?;
        Ok(LatentPoint::new(z[[0, 0]] as f64, z[[0, 1]] as f64))
    }

    pub fn encode_points(&self, h: ArrayView2<f32>) -> Result<Vec<LatentPoint>> {
        Ok(LatentPoint::from_rows(self.encode_batch(h)?.view()))
    }

    pub fn encode_records(&self, records: &ActivationRecords) -> Result<Vec<LatentPoint>> {
        self.encode_points(records.hidden.view())
    }

    /// Decoder output, in standardized activation units.
    pub fn decode(&self, z: LatentPoint) -> Result<Array1<f32>> {
        let x = Array2::from_shape_vec((1, LATENT_DIM), vec![z.z1 as f32, z.z2 as f32])
            .expect("one latent row");
        Ok(self.decoder.predict(x.view(), 1)?.row(0).to_owned())
    }

    pub fn decode_batch(&self, z: ArrayView2<f32>) -> Result<Array2<f32>> {
        self.decoder.predict(z, CHUNK)
    }

    /// Mean per-sample `0.5 * |h_hat - h|^2` in standardized units.
    pub fn reconstruction_error(&self, h: ArrayView2<f32>) -> Result<f64> {
        if h.nrows() == 0 {
            return Err(Error::InvalidInput("no activations".into()));
        }
        let mut total = 0.0;
        for start in (0..h.nrows()).step_by(CHUNK) {
            let end = (start + CHUNK).min(h.nrows());
            let x = self.standardize(h.slice(s![start..end, ..]))?;
            let z = self.encoder.predict(x.view(), CHUNK)?;
            let r = self.decoder.predict(z.view(), CHUNK)?;
            let (loss, _) = half_mse(r.view(), x.view());
            total += loss * (end - start) as f64;
        }
        Ok(total / h.nrows() as f64)
    }
}

/// Per-column mean and standard deviation, computed in f64.
fn column_stats(h: ArrayView2<f32>) -> (Array1<f32>, Array1<f32>) {
    let n = h.nrows() as f64;
    let mut mean = Array1::<f64>::zeros(h.ncols());
    for row in h.rows() {
        mean.zip_mut_with(&row, |m, &v| *m += v as f64);
    }
    mean /= n;
    let mut var = Array1::<f64>::zeros(h.ncols());
    for row in h.rows() {
        ndarray::Zip::from(&mut var)
            .and(&row)
            .and(&mean)
            .for_each(|s, &v, &m| *s += (v as f64 - m).powi(2));
    }
    var /= n;
    let std = var.mapv(|v| {
        let s = v.sqrt() as f32;
        if s < STD_FLOOR {
            1.0
        } else {
            s
        }
    });
    (mean.mapv(|m| m as f32), std)
}

#[derive(Debug, Clone)]
pub struct TrainedAutoencoder {
    pub model: AutoencoderModel,
    pub report: FitReport,
}

struct Objective<'a> {
    model: AutoencoderModel,
    enc_adam: AdamState<f32>,
    dec_adam: AdamState<f32>,
    config: &'a TrainConfig,
    train: &'a ActivationRecords,
    validation: &'a ActivationRecords,
    validation_prior: Array2<f32>,
}

impl Trainable for Objective<'_> {
    fn sample_count(&self) -> usize {
        self.train.len()
    }

    fn step(&mut self, batch: &[usize], lr: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let diverged = || Error::Diverged { iteration: 0 };
        let h = self.train.hidden.select(Axis(0), batch);
        let x = self.model.standardize(h.view())?;
        let enc = &self.model.encoder;
        let dec = &self.model.decoder;
        let overflow = |e: Error| match e {
            Error::NumericOverflow { .. } => diverged(),
            e => e,
        };
        let enc_trace =
            forward_batch(&enc.spec, &enc.params, x.view(), Mode::Train(rng)).map_err(overflow)?;
        let z = enc_trace.output().view();
        let dec_trace =
            forward_batch(&dec.spec, &dec.params, z, Mode::Train(rng)).map_err(overflow)?;
        let (mut loss, d_out) = half_mse(dec_trace.output().view(), x.view());
        let (dec_grads, mut d_z) = backward_batch(&dec.spec, &dec.params, &dec_trace, d_out.view())?;
        let lambda = self.model.mmd_weight;
        if lambda > 0.0 {
            let prior = prior_samples(batch.len(), rng);
            let (mmd, g) = mmd_sq_with_grad(z, prior.view())?;
            loss += lambda * mmd;
            d_z.scaled_add(lambda as f32, &g);
        }
        let (enc_grads, _) = backward_batch(&enc.spec, &enc.params, &enc_trace, d_z.view())?;
        if !loss.is_finite() || !enc_grads.is_finite() || !dec_grads.is_finite() {
            return Err(diverged());
        }
        let adam = &self.config.adam;
        adam_step(&mut self.model.encoder.params, &enc_grads, &mut self.enc_adam, lr, adam);
        adam_step(&mut self.model.decoder.params, &dec_grads, &mut self.dec_adam, lr, adam);
        Ok(loss)
    }

    fn validation_error(&mut self) -> Result<f64> {
        let h = self.validation.hidden.view();
        let mut loss = self.model.reconstruction_error(h)?;
        if self.model.mmd_weight > 0.0 {
            let m = self.validation_prior.nrows();
            let z = self.model.encode_batch(h.slice(s![..m, ..]))?;
            loss += self.model.mmd_weight * mmd_sq_rows(z.view(), self.validation_prior.view())?;
        }
        Ok(loss)
    }

    fn end_of_cycle(&mut self, summary: &CycleSummary) -> Result<()> {
        self.model.history.push(*summary);
        Ok(())
    }
}

fn starting_point(
    train: &ActivationRecords,
    config: &TrainConfig,
    mmd_weight: f64,
) -> Result<(AutoencoderModel, ChaCha8Rng)> {
    if train.is_empty() {
        return Err(Error::InvalidInput("no training records".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mean, std) = column_stats(train.hidden.view());
    let model = AutoencoderModel::init(
        train.hidden_width(),
        mmd_weight,
        mean,
        std,
        config.dropout_keep,
        &mut rng,
    )?;
    Ok((model, rng))
}

/// The untrained model [`train_autoencoder`] starts from with these inputs.
pub fn initial_autoencoder(
    train: &ActivationRecords,
    config: &TrainConfig,
    mmd_weight: f64,
) -> Result<AutoencoderModel> {
    Ok(starting_point(train, config, mmd_weight)?.0)
}

/// Trains the autoencoder on `train`, early-stopping on `validation`.
///
/// The loss per minibatch is the mean half squared reconstruction error plus
/// `mmd_weight` times the squared MMD between the batch latents and as many
/// fresh draws from `N(0, I)`.
pub fn train_autoencoder(
    train: &ActivationRecords,
    validation: &ActivationRecords,
    config: &TrainConfig,
    mmd_weight: f64,
) -> Result<TrainedAutoencoder> {
    config.validate()?;
    if train.is_empty() || validation.len() < 2 {
        return Err(Error::InvalidInput(
            "autoencoder needs training records and at least two validation records".into(),
        ));
    }
    if validation.hidden_width() != train.hidden_width() {
        return Err(Error::Shape("train and validation widths differ".into()));
    }
    let (model, mut rng) = starting_point(train, config, mmd_weight)?;
    let mut prior_rng = ChaCha8Rng::seed_from_u64(config.seed);
    prior_rng.set_stream(2);
    let validation_prior =
        prior_samples(validation.len().min(VALIDATION_MMD_POINTS), &mut prior_rng);
    let mut objective = Objective {
        enc_adam: AdamState::new(&model.encoder.spec),
        dec_adam: AdamState::new(&model.decoder.spec),
        model,
        config,
        train,
        validation,
        validation_prior,
    };
    let report = fit(&mut objective, config, &mut rng)?;
    Ok(TrainedAutoencoder {
        model: objective.model,
        report,
    })
}

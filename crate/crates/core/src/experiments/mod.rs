//! Studies of a trained classifier through its introspection stack: noise
//! constellations, noise-injected training, targeted FGSM and error-estimate
//! distributions.

mod attack;
mod constellation;
mod violin;

pub use attack::{fgsm_attack, input_hash, AttackConfig, AttackStep, AttackTrajectory};
pub use constellation::{
    noise_constellation, Constellation, ConstellationPoint, DEFAULT_CONSTELLATION_DRAWS,
    DEFAULT_CONSTELLATION_SAMPLE,
};
pub use violin::{median, violin_report, ViolinClass, ViolinReport};

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    argmax, record_rows, train_classifier_with, ClassifierData, ClassifierModel, NoiseInjection,
    TrainedClassifier,
};
use crate::datasets::{add_awgn, Dataset};
use crate::engine::{NetworkSpec, TrainConfig};
use crate::introspector::{AutoencoderModel, EstimatorModel, LatentPoint};
use crate::{Error, Result};

/// The trained classifier with its autoencoder and error estimator.
#[derive(Debug, Clone, Copy)]
pub struct Stack<'a> {
    pub classifier: &'a ClassifierModel,
    pub autoencoder: &'a AutoencoderModel,
    pub estimator: &'a EstimatorModel,
}

/// What the stack reports for a batch of inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub latents: Vec<LatentPoint>,
    pub labels: Vec<usize>,
    pub outputs: Array2<f32>,
    pub e_log10: Vec<f64>,
}

impl Stack<'_> {
    pub fn read(&self, x: ArrayView2<f32>) -> Result<Reading> {
        let dummy = vec![0u8; x.nrows()];
        let rec = record_rows(self.classifier, x, &dummy, None)?;
        let z = self.autoencoder.encode_batch(rec.hidden.view())?;
        let e_log10 = self.estimator.estimate_batch(z.view())?.to_vec();
        let labels = rec
            .outputs
            .rows()
            .into_iter()
            .map(|r| argmax(&r.to_vec()))
            .collect();
        Ok(Reading {
            latents: LatentPoint::from_rows(z.view()),
            labels,
            outputs: rec.outputs,
            e_log10,
        })
    }
}

/// Classifier training with `sigma ~ U(0, sigma_max)` input noise drawn per
/// minibatch; validation stays noiseless.
pub fn train_with_noise_injection(
    spec: NetworkSpec,
    data: ClassifierData<'_>,
    config: &TrainConfig,
    sigma_max: f64,
) -> Result<TrainedClassifier> {
    if !(sigma_max > 0.0 && sigma_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "sigma_max must be positive, got {sigma_max}"
        )));
    }
    train_classifier_with(spec, data, config, None, Some(NoiseInjection { sigma_max }))
}

/// Accuracy on `data` after adding white Gaussian noise of level `sigma` to
/// every input.
pub fn accuracy_under_noise<R: Rng + ?Sized>(
    model: &ClassifierModel,
    data: &Dataset,
    sigma: f64,
    rng: &mut R,
) -> Result<f64> {
    let mut x = data.inputs().clone();
    for mut row in x.axis_iter_mut(Axis(0)) {
        let noisy = add_awgn(row.view(), sigma, rng)?;
        row.assign(&noisy);
    }
    let labels = model.predict_labels(x.view())?;
    let hits = labels
        .iter()
        .zip(data.labels())
        .filter(|(p, &t)| **p == t as usize)
        .count();
    Ok(hits as f64 / data.len().max(1) as f64)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::classifier::Architecture;
    use crate::engine::{Activation, Network};
    use crate::introspector::{tower, DEFAULT_TARGET_FLOOR};
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) struct Owned {
        pub classifier: ClassifierModel,
        pub autoencoder: AutoencoderModel,
        pub estimator: EstimatorModel,
    }

    impl Owned {
        pub fn stack(&self) -> Stack<'_> {
            Stack {
                classifier: &self.classifier,
                autoencoder: &self.autoencoder,
                estimator: &self.estimator,
            }
        }
    }

    /// Randomly initialized stack over a small classifier.
    pub(crate) fn random_stack(seed: u64) -> Owned {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = NetworkSpec::mlp(
            crate::datasets::INPUT_WIDTH,
            &[24, 16],
            Activation::Elu,
            10,
            Activation::Sigmoid,
            1.0,
        )
        .unwrap();
        let classifier = ClassifierModel::new(spec.clone(), crate::engine::Params::init(&spec, &mut rng)).unwrap();
        let width = classifier.hidden_width();
        let autoencoder =
            AutoencoderModel::init(width, 1.0, Array1::zeros(width), Array1::ones(width), 1.0, &mut rng)
                .unwrap();
        let estimator =
            EstimatorModel::new(Network::init(tower(2, 1, 1.0).unwrap(), &mut rng), DEFAULT_TARGET_FLOOR)
                .unwrap();
        Owned {
            classifier,
            autoencoder,
            estimator,
        }
    }

    #[test]
    fn noise_training_requires_positive_sigma() {
        let data = crate::classifier::tests::toy_dataset(20, 0);
        let config = TrainConfig {
            cycle_length: 2,
            num_cycles: 1,
            lr_min: 0.0,
            lr_max: 1e-3,
            batch_size: 4,
            patience: 1,
            dropout_keep: 1.0,
            adam: Default::default(),
            seed: 0,
        };
        let spec = Architecture::Desk.spec(1.0).unwrap();
        let d = ClassifierData {
            train: &data,
            validation: &data,
            test: None,
        };
        assert!(train_with_noise_injection(spec.clone(), d, &config, 0.0).is_err());
        assert!(train_with_noise_injection(spec, d, &config, 1.0).is_ok());
    }

    #[test]
    fn zero_noise_accuracy_is_plain_accuracy() {
        let owned = random_stack(1);
        let data = crate::classifier::tests::toy_dataset(50, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = accuracy_under_noise(&owned.classifier, &data, 0.0, &mut rng).unwrap();
        assert_eq!(a, owned.classifier.accuracy(&data).unwrap());
    }

    #[test]
    fn reading_matches_the_parts() {
        let owned = random_stack(3);
        let data = crate::classifier::tests::toy_dataset(12, 4);
        let r = owned.stack().read(data.inputs().view()).unwrap();
        let labels = owned.classifier.predict_labels(data.inputs().view()).unwrap();
        assert_eq!(r.labels, labels);
        let rec = crate::classifier::record_activations(&owned.classifier, &data).unwrap();
        let z = owned.autoencoder.encode_records(&rec).unwrap();
        assert_eq!(r.latents, z);
        assert_eq!(r.e_log10, owned.estimator.estimate_points(&z).unwrap());
    }
}

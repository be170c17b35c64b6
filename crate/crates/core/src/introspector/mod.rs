//! Autoencoder over concatenated hidden activations and the error estimator
//! that reads its two-dimensional bottleneck.

mod autoencoder;
mod estimator;
mod mmd;
mod structure;

pub use autoencoder::{
    initial_autoencoder, train_autoencoder, AutoencoderModel, TrainedAutoencoder, DEFAULT_MMD_WEIGHT, LATENT_DIM,
};
pub use estimator::{
    confidence, train_estimator, EstimatorModel, TrainedEstimator, DEFAULT_ESTIMATOR_BATCH,
    DEFAULT_TARGET_FLOOR,
};
pub use structure::{nearest_neighbor_agreement, pairwise_distance_medians};
pub use mmd::{mmd_sq, mmd_sq_rows, mmd_sq_with_grad, KERNEL_VARIANCE};

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::{Activation, NetworkSpec};
use crate::Result;

/// Width of each of the three hidden layers in every introspection network.
pub const INTROSPECTION_WIDTH: usize = 200;
pub const INTROSPECTION_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub z1: f64,
    pub z2: f64,
}

impl LatentPoint {
    pub fn new(z1: f64, z2: f64) -> Self {
        LatentPoint { z1, z2 }
    }

    pub fn distance(&self, other: &LatentPoint) -> f64 {
        (self.z1 - other.z1).hypot(self.z2 - other.z2)
    }

    pub fn is_finite(&self) -> bool {
        self.z1.is_finite() && self.z2.is_finite()
    }

    pub fn to_rows(points: &[LatentPoint]) -> Array2<f64> {
        Array2::from_shape_fn((points.len(), 2), |(i, d)| {
            if d == 0 {
                points[i].z1
            } else {
                points[i].z2
            }
        })
    }

    pub fn from_rows(rows: ArrayView2<f32>) -> Vec<LatentPoint> {
        rows.rows()
            .into_iter()
            .map(|r| LatentPoint::new(r[0] as f64, r[1] as f64))
            .collect()
    }
}

/// `n` draws from the standard normal prior on the latent plane.
pub fn prior_samples<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Array2<f32> {
    Array2::from_shape_simple_fn((n, LATENT_DIM), || rng.sample::<f32, _>(StandardNormal))
}

pub(crate) fn tower(
    input: usize,
    output: usize,
    dropout_keep: f64,
) -> Result<NetworkSpec> {
    NetworkSpec::mlp(
        input,
        &[INTROSPECTION_WIDTH; INTROSPECTION_DEPTH],
        Activation::Elu,
        output,
        Activation::Linear,
        dropout_keep,
    )
}

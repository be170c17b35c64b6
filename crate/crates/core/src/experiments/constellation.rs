use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Stack;
use crate::datasets::{add_awgn, Dataset};
use crate::introspector::LatentPoint;
use crate::{Error, Result};

pub const DEFAULT_CONSTELLATION_SAMPLE: usize = 907;
pub const DEFAULT_CONSTELLATION_DRAWS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstellationPoint {
    pub z: LatentPoint,
    pub label: usize,
    pub e_log10: f64,
}

/// Latents of many noisy copies of one input at a single noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub sample_id: usize,
    pub sigma: f64,
    /// Latent of the clean input.
    pub origin: LatentPoint,
    pub points: Vec<ConstellationPoint>,
}

impl Constellation {
    /// Offsets of each point from the clean latent.
    pub fn displacements(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|p| (p.z.z1 - self.origin.z1, p.z.z2 - self.origin.z2))
            .collect()
    }

    pub fn mean_displacement(&self) -> f64 {
        let d = self.displacements();
        d.iter().map(|(a, b)| a.hypot(*b)).sum::<f64>() / d.len().max(1) as f64
    }
}

/// For each `sigma`, `draws` copies of sample `sample_id` with white Gaussian
/// noise added, read through the stack. Noise levels are processed in order
/// from the same generator.
pub fn noise_constellation<R: Rng + ?Sized>(
    stack: Stack<'_>,
    data: &Dataset,
    sample_id: usize,
    sigmas: &[f64],
    draws: usize,
    rng: &mut R,
) -> Result<Vec<Constellation>> {
    if sample_id >= data.len() {
        return Err(Error::InvalidInput(format!(
            "sample {sample_id} is outside a set of {}",
            data.len()
        )));
    }
    let x = data.input(sample_id);
    let origin = stack.read(x.insert_axis(ndarray::Axis(0)))?.latents[0];
    sigmas
        .iter()
        .map(|&sigma| {
            let mut batch = Array2::zeros((draws, x.len()));
            for mut row in batch.rows_mut() {
                row.assign(&add_awgn(x, sigma, rng)?);
            }
            let r = stack.read(batch.view())?;
            let points = (0..draws)
                .map(|i| ConstellationPoint {
                    z: r.latents[i],
                    label: r.labels[i],
                    e_log10: r.e_log10[i],
                })
                .collect();
            Ok(Constellation {
                sample_id,
                sigma,
                origin,
                points,
            })
        })
        .collect()
}

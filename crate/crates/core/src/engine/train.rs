//! Cycle-based minibatch training driver.
//!
//! One cycle is one period of the triangular learning-rate schedule. The
//! validation error is measured at every cycle end, and training stops early
//! once it has increased on `patience` consecutive cycle ends.

use rand::seq::SliceRandom;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{clr_lr, AdamConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Iterations per learning-rate cycle.
    pub cycle_length: usize,
    pub num_cycles: usize,
    pub lr_min: f64,
    pub lr_max: f64,
    pub batch_size: usize,
    /// Consecutive cycle-end validation increases tolerated before stopping.
    pub patience: usize,
    pub dropout_keep: f64,
    #[serde(default)]
    pub adam: AdamConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.cycle_length < 1 {
            return fail("cycle_length must be at least 1");
        }
        if self.num_cycles < 1 {
            return fail("num_cycles must be at least 1");
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return fail("learning rates must satisfy 0 <= lr_min <= lr_max");
        }
        if self.batch_size < 1 {
            return fail("batch_size must be at least 1");
        }
        if self.patience < 1 {
            return fail("patience must be at least 1");
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return fail("dropout_keep must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn lr_at(&self, iteration: usize) -> f64 {
        clr_lr(iteration, self.cycle_length, self.lr_min, self.lr_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub cycle: usize,
    /// Mean minibatch loss over the cycle.
    pub train_error: f64,
    pub validation_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    /// Patience exhausted at the end of `cycle`.
    EarlyStopped { cycle: usize },
    /// A non-finite loss or gradient appeared; the model holds the last
    /// parameters that produced finite values.
    Diverged { iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub cycles: Vec<CycleSummary>,
    pub iterations: usize,
    pub stop: StopReason,
}

/// A model the driver can optimize.
pub trait Trainable {
    fn sample_count(&self) -> usize;

    /// One optimizer step on the given sample indices; returns the batch loss.
    ///
    /// Must return [`Error::Diverged`] without touching the parameters when
    /// the loss or any gradient is non-finite.
    fn step(&mut self, batch: &[usize], lr: f64, rng: &mut ChaCha8Rng) -> Result<f64>;

    fn validation_error(&mut self) -> Result<f64>;

    fn end_of_cycle(&mut self, _summary: &CycleSummary) -> Result<()> {
        Ok(())
    }
}

/// Epoch-style sampler: walks a shuffled permutation in slices of
/// `batch_size`, reshuffling when fewer than a full batch remain.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize) -> Self {
        BatchSampler {
            order: (0..n).collect(),
            cursor: n,
            batch_size: batch_size.min(n).max(1),
        }
    }

    pub fn next_batch(&mut self, rng: &mut dyn RngCore) -> &[usize] {
        if self.cursor + self.batch_size > self.order.len() {
            self.order.shuffle(rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += self.batch_size;
        &self.order[start..self.cursor]
    }
}

pub fn fit<M: Trainable>(
    model: &mut M,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FitReport> {
    config.validate()?;
    let n = model.sample_count();
    if n == 0 {
        return Err(Error::InvalidInput("no training samples".into()));
    }
    let mut sampler = BatchSampler::new(n, config.batch_size);
    let mut cycles = Vec::new();
    let mut iteration = 0;
    let mut rises = 0;
    let mut previous: Option<f64> = None;

    for cycle in 0..config.num_cycles {
        let mut loss_sum = 0.0;
        for _ in 0..config.cycle_length {
            let lr = config.lr_at(iteration);
            let batch = sampler.next_batch(rng).to_vec();
            match model.step(&batch, lr, rng) {
                Ok(loss) => loss_sum += loss,
                Err(Error::Diverged { .. }) => {
                    return Ok(FitReport {
                        cycles,
                        iterations: iteration,
                        stop: StopReason::Diverged { iteration },
                    })
                }
                Err(e) => return Err(e),
            }
            iteration += 1;
        }
        let summary = CycleSummary {
            cycle,
            train_error: loss_sum / config.cycle_length as f64,
            validation_error: model.validation_error()?,
        };
        model.end_of_cycle(&summary)?;
        cycles.push(summary);

        if let Some(prev) = previous {
            if summary.validation_error > prev {
                rises += 1;
            } else {
                rises = 0;
            }
        }
        previous = Some(summary.validation_error);
        if rises >= config.patience {
            return Ok(FitReport {
                cycles,
                iterations: iteration,
                stop: StopReason::EarlyStopped { cycle },
            });
        }
    }
    Ok(FitReport {
        cycles,
        iterations: iteration,
        stop: StopReason::Completed,
    })
}

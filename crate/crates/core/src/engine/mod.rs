//! Dense feed-forward networks with hand-written reverse-mode differentiation.
//!
//! Every model in the crate (classifier, autoencoder halves, error estimator)
//! is a stack of dense layers `h_i = act(W_i h_{i-1} + b_i)`. This module owns
//! the forward pass, the backward pass (gradients with respect to both the
//! parameters and the network input), the Adam optimizer, the triangular
//! cyclic learning-rate schedule and the cycle-based training driver.
//!
//! Data is processed in row-major batches: a batch of `n` samples of width `d`
//! is an `n x d` matrix, and layer weights are stored `output x input`.

mod activation;
mod network;
mod optim;
mod scalar;
mod train;

pub use activation::{elu, sigmoid, Activation};
pub use network::{
    backward, backward_batch, forward, forward_batch, half_mse, hidden_concat, predict_batch,
    Dense, LayerSpec, LayerTrace, Mode, Network, NetworkSpec, Params, Trace,
};
pub use optim::{adam_step, clr_lr, AdamConfig, AdamState};
pub use scalar::Scalar;
pub use train::{fit, BatchSampler, CycleSummary, FitReport, StopReason, TrainConfig, Trainable};

//! Finite-difference oracle for the dense engine.
//!
//! The reference loss is evaluated with plain nested loops over `f64`, so it
//! shares nothing with the batched forward pass it checks.

use ndarray::Array2;
use rand::Rng;
use selfintro::engine::{self, Activation, Dense, NetworkSpec, Params};

pub const FD_STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-4;

fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Elu => {
            if x >= 0.0 {
                x
            } else {
                x.exp() - 1.0
            }
        }
        Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        Activation::Linear => x,
    }
}

pub fn reference_output(spec: &NetworkSpec, params: &Params<f64>, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (l, d) in spec.layers.iter().zip(&params.layers) {
        let mut next = vec![0.0; l.output_width];
        for (o, slot) in next.iter_mut().enumerate() {
            let mut s = d.bias[o];
            for (i, &v) in a.iter().enumerate() {
                s += d.weight[[o, i]] * v;
            }
            *slot = act(l.activation, s);
        }
        a = next;
    }
    a
}

pub fn reference_loss(spec: &NetworkSpec, params: &Params<f64>, x: &[f64], t: &[f64]) -> f64 {
    reference_output(spec, params, x)
        .iter()
        .zip(t)
        .map(|(y, t)| 0.5 * (y - t) * (y - t))
        .sum()
}

/// Relative error, with an absolute floor for components that are both tiny.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn random_network<R: Rng>(rng: &mut R) -> (NetworkSpec, Params<f64>, Vec<f64>, Vec<f64>) {
    let acts = [Activation::Elu, Activation::Sigmoid, Activation::Linear];
    let depth = rng.random_range(1..=3);
    let mut widths = vec![rng.random_range(1..=8)];
    for _ in 0..depth {
        widths.push(rng.random_range(1..=8));
    }
    let layers = widths
        .windows(2)
        .map(|w| engine::LayerSpec {
            input_width: w[0],
            output_width: w[1],
            activation: acts[rng.random_range(0..acts.len())],
        })
        .collect();
    let spec = NetworkSpec::new(layers, 1.0).unwrap();
    let params = Params {
        layers: spec
            .layers
            .iter()
            .map(|l| Dense {
                weight: Array2::from_shape_fn((l.output_width, l.input_width), |_| {
                    rng.random_range(-1.0..1.0)
                }),
                bias: (0..l.output_width).map(|_| rng.random_range(-0.5..0.5)).collect(),
            })
            .collect(),
    };
    let x = (0..spec.input_width()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t = (0..spec.output_width()).map(|_| rng.random_range(-1.0..1.0)).collect();
    (spec, params, x, t)
}

/// Largest relative error between `backward` and central differences of the
/// reference loss, over every parameter of the network.
pub fn max_param_rel_err(spec: &NetworkSpec, params: &Params<f64>, x: &[f64], t: &[f64]) -> f64 {
    let analytic = engine::backward(spec, params, x, t).unwrap().flat_values();
    let count = analytic.len();
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let mut plus = params.clone();
        plus.for_each_mut(|j, v| {
            if j == k {
                *v += FD_STEP
            }
        });
        let mut minus = params.clone();
        minus.for_each_mut(|j, v| {
            if j == k {
                *v -= FD_STEP
            }
        });
        let fd = (reference_loss(spec, &plus, x, t) - reference_loss(spec, &minus, x, t))
            / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic[k], fd));
    }
    worst
}

/// Same check for the gradient with respect to the network input.
pub fn max_input_rel_err(spec: &NetworkSpec, params: &Params<f64>, x: &[f64], t: &[f64]) -> f64 {
    let xs = ndarray::Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
    let ts = ndarray::Array2::from_shape_vec((1, t.len()), t.to_vec()).unwrap();
    let trace = engine::forward_batch(spec, params, xs.view(), engine::Mode::Eval).unwrap();
    let (_, d_out) = engine::half_mse(trace.output().view(), ts.view());
    let (_, d_x) = engine::backward_batch(spec, params, &trace, d_out.view()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.to_vec();
        plus[i] += FD_STEP;
        let mut minus = x.to_vec();
        minus[i] -= FD_STEP;
        let fd = (reference_loss(spec, params, &plus, t) - reference_loss(spec, params, &minus, t))
            / (2.0 * FD_STEP);
        worst = worst.max(rel_err(d_x[[0, i]], fd));
    }
    worst
}

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::{NetworkSpec, Params, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub m: Params<T>,
    pub v: Params<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(spec: &NetworkSpec) -> Self {
        AdamState {
            m: Params::zeros(spec),
            v: Params::zeros(spec),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(
    params: &mut Params<T>,
    grads: &Params<T>,
    state: &mut AdamState<T>,
    lr: f64,
    cfg: &AdamConfig,
) {
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let one = T::one();
    let c1 = T::from_f64_lossy(1.0 - cfg.beta1.powi(t));
    let c2 = T::from_f64_lossy(1.0 - cfg.beta2.powi(t));
    let lr = T::from_f64_lossy(lr);
    let eps = T::from_f64_lossy(cfg.eps);

    let update = |p: &mut T, &g: &T, m: &mut T, v: &mut T| {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    };

    for (((p, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.layers.iter_mut())
        .zip(state.v.layers.iter_mut())
    {
        Zip::from(&mut p.weight)
            .and(&g.weight)
            .and(&mut m.weight)
            .and(&mut v.weight)
            .for_each(update);
        Zip::from(&mut p.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(update);
    }
}

/// Triangular cyclic learning rate with period `period`: a linear rise from
/// `lr_min` to `lr_max` over the first half-period, then back down.
///
/// A period shorter than 2 has no room for a triangle; `lr_max` is returned.
pub fn clr_lr(iteration: usize, period: usize, lr_min: f64, lr_max: f64) -> f64 {
    if period < 2 {
        return lr_max;
    }
    let phase = (iteration % period) as f64 / period as f64;
    let tri = 1.0 - (2.0 * phase - 1.0).abs();
    lr_min + (lr_max - lr_min) * tri
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Activation, Dense};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn scalar_spec() -> NetworkSpec {
        NetworkSpec::mlp(1, &[], Activation::Elu, 1, Activation::Linear, 1.0).unwrap()
    }

    fn scalar(w: f64) -> Params<f64> {
        Params {
            layers: vec![Dense {
                weight: array![[w]],
                bias: array![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let spec = scalar_spec();
        let mut p = scalar(0.7);
        let mut st = AdamState::new(&spec);
        adam_step(&mut p, &scalar(0.0), &mut st, 0.1, &AdamConfig::default());
        assert_eq!(p, scalar(0.7));
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let spec = scalar_spec();
        let mut p = scalar(0.0);
        let mut st = AdamState::new(&spec);
        adam_step(&mut p, &scalar(1.0), &mut st, 0.1, &AdamConfig::default());
        assert_abs_diff_eq!(p.layers[0].weight[[0, 0]], -0.1, epsilon = 1e-7);
    }

    #[test]
    fn descends_on_a_parabola() {
        // f(w) = w^2, f'(w) = 2w, starting at w = 1.
        let spec = scalar_spec();
        let mut p = scalar(1.0);
        let mut st = AdamState::new(&spec);
        let mut last = 1.0_f64;
        for _ in 0..3 {
            let w = p.layers[0].weight[[0, 0]];
            adam_step(&mut p, &scalar(2.0 * w), &mut st, 0.1, &AdamConfig::default());
            let now = p.layers[0].weight[[0, 0]].abs();
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn clr_reference_points() {
        assert_eq!(clr_lr(0, 3000, 0.0, 1e-5), 0.0);
        assert_abs_diff_eq!(clr_lr(1500, 3000, 0.0, 1e-5), 1e-5, epsilon = 1e-20);
        assert_abs_diff_eq!(clr_lr(750, 3000, 0.0, 1e-5), 5e-6, epsilon = 1e-20);
        assert_abs_diff_eq!(clr_lr(2250, 3000, 0.0, 1e-5), 5e-6, epsilon = 1e-20);
    }

    proptest! {
        #[test]
        fn clr_is_periodic(i in 0usize..100_000, period in 2usize..5000) {
            prop_assert_eq!(clr_lr(i, period, 1e-4, 3e-3), clr_lr(i + period, period, 1e-4, 3e-3));
        }

        #[test]
        fn clr_stays_in_range(i in 0usize..100_000, period in 2usize..5000) {
            let lr = clr_lr(i, period, 1e-4, 3e-3);
            prop_assert!((1e-4..=3e-3 + 1e-18).contains(&lr));
        }

        #[test]
        fn first_update_opposes_gradient(g in prop::collection::vec(-10.0f64..10.0, 1..12)) {
            let n = g.len();
            let spec = NetworkSpec::mlp(n, &[], Activation::Elu, 1, Activation::Linear, 1.0).unwrap();
            let mut p = Params::<f64>::zeros(&spec);
            let grads = Params {
                layers: vec![Dense { weight: ndarray::Array2::from_shape_vec((1, n), g.clone()).unwrap(), bias: array![0.0] }],
            };
            let mut st = AdamState::new(&spec);
            adam_step(&mut p, &grads, &mut st, 0.01, &AdamConfig::default());
            for (w, gi) in p.layers[0].weight.iter().zip(&g) {
                if *gi != 0.0 {
                    prop_assert_eq!(w.signum(), -gi.signum());
                } else {
                    prop_assert_eq!(*w, 0.0);
                }
            }
        }
    }
}

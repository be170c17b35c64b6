use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Element-wise nonlinearity applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Exponential linear unit with `alpha = 1`.
    Elu,
    Sigmoid,
    Linear,
}

/// `x` for `x >= 0`, `exp(x) - 1` otherwise.
#[inline]
pub fn elu<T: Float>(x: T) -> T {
    if x >= T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
pub fn sigmoid<T: Float>(x: T) -> T {
    // Split on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl Activation {
    #[inline]
    pub fn apply<T: Float>(self, x: T) -> T {
        match self {
            Activation::Elu => elu(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative at pre-activation `pre`, given `post = apply(pre)`.
    #[inline]
    pub fn derivative<T: Float>(self, pre: T, post: T) -> T {
        match self {
            Activation::Elu => {
                if pre >= T::zero() {
                    T::one()
                } else {
                    post + T::one()
                }
            }
            Activation::Sigmoid => post * (T::one() - post),
            Activation::Linear => T::one(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn elu_values() {
        assert_eq!(elu(0.0_f64), 0.0);
        assert_eq!(elu(2.5_f64), 2.5);
        assert_abs_diff_eq!(elu(-1.0_f64), (-1.0_f64).exp() - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(elu(-1.0_f64), -0.63212, epsilon = 1e-5);
    }

    #[test]
    fn elu_is_monotone_and_continuous_at_zero() {
        let xs: Vec<f64> = (-500..=500).map(|i| i as f64 * 0.01).collect();
        for w in xs.windows(2) {
            assert!(elu(w[0]) < elu(w[1]));
        }
        assert_abs_diff_eq!(elu(-1e-12_f64), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0_f32), 0.5);
        assert!(sigmoid(-1000.0_f32).is_finite());
        assert!(sigmoid(1000.0_f32) <= 1.0);
    }

    #[test]
    fn derivatives_match_differences() {
        for act in [Activation::Elu, Activation::Sigmoid, Activation::Linear] {
            for &x in &[-2.0_f64, -0.3, 0.4, 1.7] {
                let h = 1e-6;
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert_abs_diff_eq!(act.derivative(x, act.apply(x)), fd, epsilon = 1e-8);
            }
        }
    }
}

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// `x + n` with `n ~ N(0, sigma^2 I)`. The result is not clipped.
pub fn add_awgn<R: Rng + ?Sized>(x: ArrayView1<f32>, sigma: f64, rng: &mut R) -> Result<Array1<f32>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.to_owned());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    Ok(x.mapv(|v| v + normal.sample(rng) as f32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_is_identity() {
        let x = Array1::from(vec![0.1_f32, 0.5, 0.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(add_awgn(x.view(), 0.0, &mut rng).unwrap(), x);
        assert!(add_awgn(x.view(), -0.1, &mut rng).is_err());
    }

    #[test]
    fn noise_moments() {
        let x = Array1::from(vec![0.25_f32; 4]);
        let sigma = 0.3;
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut sum = [0.0_f64; 4];
        let mut sq = [0.0_f64; 4];
        for _ in 0..draws {
            let y = add_awgn(x.view(), sigma, &mut rng).unwrap();
            for i in 0..4 {
                let d = (y[i] - x[i]) as f64;
                sum[i] += d;
                sq[i] += d * d;
            }
        }
        for i in 0..4 {
            let mean = sum[i] / draws as f64;
            let var = sq[i] / draws as f64 - mean * mean;
            assert!(mean.abs() < 3.0 * sigma / (draws as f64).sqrt(), "mean {mean}");
            assert!((var - 0.09).abs() < 0.05 * 0.09, "var {var}");
        }
    }
}

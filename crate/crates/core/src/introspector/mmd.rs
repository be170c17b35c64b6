//! Squared maximum mean discrepancy with a Gaussian kernel.

use ndarray::{Array2, ArrayView2};

use super::LatentPoint;
use crate::engine::Scalar;
use crate::{Error, Result};

/// Kernel variance: `k(a, b) = exp(-|a - b|^2 / (2 * KERNEL_VARIANCE))`.
pub const KERNEL_VARIANCE: f64 = 2.0;

#[inline]
fn kernel(d2: f64) -> f64 {
    (-d2 / (2.0 * KERNEL_VARIANCE)).exp()
}

fn sq_dist<T: Scalar>(a: ArrayView2<T>, i: usize, b: ArrayView2<T>, j: usize) -> f64 {
    let mut s = 0.0;
    for d in 0..a.ncols() {
        let diff = a[[i, d]].to_f64_lossy() - b[[j, d]].to_f64_lossy();
        s += diff * diff;
    }
    s
}

fn mean_kernel<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            s += kernel(sq_dist(a, i, b, j));
        }
    }
    s / (a.nrows() * b.nrows()) as f64
}

fn check<T>(z: ArrayView2<T>, p: ArrayView2<T>) -> Result<()> {
    if z.nrows() < 2 || p.nrows() < 2 {
        return Err(Error::InvalidInput(
            "MMD needs at least two points per set".into(),
        ));
    }
    if z.ncols() != p.ncols() {
        return Err(Error::Shape("MMD sets differ in dimension".into()));
    }
    Ok(())
}

/// Biased (V-statistic) estimate over the rows of `z` and `p`, clamped at 0.
pub fn mmd_sq_rows<T: Scalar>(z: ArrayView2<T>, p: ArrayView2<T>) -> Result<f64> {
    check(z, p)?;
    let v = mean_kernel(z, z) + mean_kernel(p, p) - 2.0 * mean_kernel(z, p);
    Ok(v.max(0.0))
}

pub fn mmd_sq(z: &[LatentPoint], p: &[LatentPoint]) -> Result<f64> {
    mmd_sq_rows(LatentPoint::to_rows(z).view(), LatentPoint::to_rows(p).view())
}

/// The unclamped estimate together with its gradient with respect to `z`.
pub fn mmd_sq_with_grad<T: Scalar>(
    z: ArrayView2<T>,
    p: ArrayView2<T>,
) -> Result<(f64, Array2<T>)> {
    check(z, p)?;
    let n = z.nrows() as f64;
    let m = p.nrows() as f64;
    let dim = z.ncols();
    let mut grad = Array2::<f64>::zeros(z.dim());
    let mut kzz = 0.0;
    let mut kzp = 0.0;
    // d k(a, b) / d a = -k(a, b) (a - b) / KERNEL_VARIANCE
    for i in 0..z.nrows() {
        for j in 0..z.nrows() {
            let k = kernel(sq_dist(z, i, z, j));
            kzz += k;
            let c = -2.0 * k / (KERNEL_VARIANCE * n * n);
            for d in 0..dim {
                grad[[i, d]] += c * (z[[i, d]].to_f64_lossy() - z[[j, d]].to_f64_lossy());
            }
        }
        for j in 0..p.nrows() {
            let k = kernel(sq_dist(z, i, p, j));
            kzp += k;
            let c = 2.0 * k / (KERNEL_VARIANCE * n * m);
            for d in 0..dim {
                grad[[i, d]] += c * (z[[i, d]].to_f64_lossy() - p[[j, d]].to_f64_lossy());
            }
        }
    }
    let value = kzz / (n * n) + mean_kernel(p, p) - 2.0 * kzp / (n * m);
    Ok((value, grad.mapv(T::from_f64_lossy)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_cloud(n: usize, center: (f64, f64), seed: u64) -> Vec<LatentPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                LatentPoint::new(center.0 + a, center.1 + b)
            })
            .collect()
    }

    /// Direct double sum with the kernel written out, no shared helpers.
    fn brute_force(z: &[LatentPoint], p: &[LatentPoint]) -> f64 {
        let k = |a: &LatentPoint, b: &LatentPoint| {
            (-((a.z1 - b.z1).powi(2) + (a.z2 - b.z2).powi(2)) / 4.0).exp()
        };
        let mean = |x: &[LatentPoint], y: &[LatentPoint]| {
            x.iter().flat_map(|a| y.iter().map(move |b| k(a, b))).sum::<f64>()
                / (x.len() * y.len()) as f64
        };
        mean(z, z) + mean(p, p) - 2.0 * mean(z, p)
    }

    #[test]
    fn identical_sets_vanish() {
        let a = vec![LatentPoint::new(0.0, 0.0), LatentPoint::new(1.0, 0.0)];
        assert_eq!(mmd_sq(&a, &a).unwrap(), 0.0);
        let c = gaussian_cloud(64, (0.3, -0.2), 9);
        assert_eq!(mmd_sq(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn rejects_tiny_sets() {
        let a = vec![LatentPoint::new(0.0, 0.0)];
        let b = vec![LatentPoint::new(0.0, 0.0), LatentPoint::new(1.0, 1.0)];
        assert!(mmd_sq(&a, &b).is_err());
    }

    #[test]
    fn shifted_cloud_is_farther_than_a_fresh_draw() {
        let prior = gaussian_cloud(256, (0.0, 0.0), 1);
        let fresh = gaussian_cloud(256, (0.0, 0.0), 2);
        let shifted = gaussian_cloud(256, (5.0, 5.0), 3);
        let near = mmd_sq(&fresh, &prior).unwrap();
        let far = mmd_sq(&shifted, &prior).unwrap();
        assert!((near - brute_force(&fresh, &prior)).abs() < 1e-12);
        assert!((far - brute_force(&shifted, &prior)).abs() < 1e-12);
        assert!(far > near, "{far} <= {near}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let z = LatentPoint::to_rows(&gaussian_cloud(7, (0.5, 0.1), 4));
        let p = LatentPoint::to_rows(&gaussian_cloud(5, (0.0, 0.0), 5));
        let (v, g) = mmd_sq_with_grad(z.view(), p.view()).unwrap();
        assert!((v - mmd_sq_rows(z.view(), p.view()).unwrap()).abs() < 1e-14);
        let h = 1e-5;
        for i in 0..z.nrows() {
            for d in 0..2 {
                let mut zp = z.clone();
                zp[[i, d]] += h;
                let mut zm = z.clone();
                zm[[i, d]] -= h;
                let (vp, _) = mmd_sq_with_grad(zp.view(), p.view()).unwrap();
                let (vm, _) = mmd_sq_with_grad(zm.view(), p.view()).unwrap();
                let fd = (vp - vm) / (2.0 * h);
                assert!((fd - g[[i, d]]).abs() < 1e-8, "{fd} vs {}", g[[i, d]]);
            }
        }
    }

    fn cloud() -> impl Strategy<Value = Vec<LatentPoint>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..12)
            .prop_map(|v| v.into_iter().map(|(a, b)| LatentPoint::new(a, b)).collect())
    }

    proptest! {
        #[test]
        fn self_distance_is_zero(x in cloud()) {
            prop_assert_eq!(mmd_sq(&x, &x).unwrap(), 0.0);
        }

        #[test]
        fn symmetric_and_non_negative(x in cloud(), y in cloud()) {
            let a = mmd_sq(&x, &y).unwrap();
            let b = mmd_sq(&y, &x).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::introspector::LatentPoint;
use crate::{Error, Result};

pub const MIN_DENSITY_POINTS: usize = 10;
/// Smallest kernel width used on either axis.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

/// Square evaluation domain `[lo, hi]^2` sampled every `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lo: -4.0,
            hi: 4.0,
            step: 0.1,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi && self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(
                "grid needs lo < hi and a positive step".into(),
            ));
        }
        Ok(())
    }

    /// Nodes per axis, both ends included.
    pub fn nodes(&self) -> usize {
        ((self.hi - self.lo) / self.step).round() as usize + 1
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.coord(i)).collect()
    }

    pub fn contains(&self, z: &LatentPoint) -> bool {
        (self.lo..=self.hi).contains(&z.z1) && (self.lo..=self.hi).contains(&z.z2)
    }
}

/// Density of one class on the grid; `values[[i, j]]` is the value at
/// `(coord(i), coord(j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub class: usize,
    pub config: GridConfig,
    pub bandwidth: (f64, f64),
    pub values: Array2<f64>,
}

impl DensityGrid {
    pub fn riemann_sum(&self) -> f64 {
        self.values.sum() * self.config.step * self.config.step
    }
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Per-axis rule of thumb for a 2-D Gaussian kernel: `h_d = sigma_d * n^(-1/6)`.
pub fn silverman_bandwidth(points: &[LatentPoint]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("bandwidth needs two points".into()));
    }
    let factor = (points.len() as f64).powf(-1.0 / 6.0);
    let h = |s: f64| (s * factor).max(BANDWIDTH_FLOOR);
    Ok((
        h(sample_std(points.iter().map(|p| p.z1))),
        h(sample_std(points.iter().map(|p| p.z2))),
    ))
}

/// Unnormalized-domain KDE value at `z`, summed term by term.
pub fn kde_at(points: &[LatentPoint], bandwidth: (f64, f64), z: LatentPoint) -> f64 {
    let (h1, h2) = bandwidth;
    let sum: f64 = points
        .iter()
        .map(|p| {
            let u = (z.z1 - p.z1) / h1;
            let v = (z.z2 - p.z2) / h2;
            (-0.5 * (u * u + v * v)).exp()
        })
        .sum();
    sum / (points.len() as f64 * 2.0 * PI * h1 * h2)
}

pub fn class_density(
    points: &[LatentPoint],
    class: usize,
    grid: &GridConfig,
) -> Result<DensityGrid> {
    if points.len() < MIN_DENSITY_POINTS {
        return Err(Error::InvalidInput(format!(
            "class {class} has {} latent points, at least {MIN_DENSITY_POINTS} needed",
            points.len()
        )));
    }
    class_density_with(points, class, grid, silverman_bandwidth(points)?)
}

/// Gaussian KDE on the grid with a given bandwidth, rescaled so that the
/// Riemann sum over the grid is 1.
pub fn class_density_with(
    points: &[LatentPoint],
    class: usize,
    grid: &GridConfig,
    bandwidth: (f64, f64),
) -> Result<DensityGrid> {
    grid.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidInput("no latent points".into()));
    }
    if !(bandwidth.0 > 0.0 && bandwidth.1 > 0.0) {
        return Err(Error::InvalidInput("bandwidth must be positive".into()));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput("non-finite latent point".into()));
    }
    // The kernel is a product over axes, so the grid is K1 * K2^T.
    let coords = grid.coords();
    let axis = |h: f64, pick: fn(&LatentPoint) -> f64| {
        Array2::from_shape_fn((coords.len(), points.len()), |(i, p)| {
            let u = (coords[i] - pick(&points[p])) / h;
            (-0.5 * u * u).exp()
        })
    };
    let k1 = axis(bandwidth.0, |p| p.z1);
    let k2 = axis(bandwidth.1, |p| p.z2);
    let mut values = k1.dot(&k2.t());
    let mass = values.sum() * grid.step * grid.step;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "class {class} places no density mass on the grid"
        )));
    }
    values /= mass;
    Ok(DensityGrid {
        class,
        config: *grid,
        bandwidth,
        values,
    })
}

/// `sum_ij z_ij f(z_ij) dz^2`.
///
/// The density already has unit Riemann sum, so this is a convex combination
/// of grid nodes; the clamp only absorbs rounding at the domain edge.
pub fn expected_latent(grid: &DensityGrid) -> LatentPoint {
    let c = &grid.config;
    let area = c.step * c.step;
    let (mut z1, mut z2) = (0.0, 0.0);
    for ((i, j), &f) in grid.values.indexed_iter() {
        z1 += c.coord(i) * f * area;
        z2 += c.coord(j) * f * area;
    }
    LatentPoint::new(z1.clamp(c.lo, c.hi), z2.clamp(c.lo, c.hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cloud(n: usize, c: (f64, f64), s: f64, seed: u64) -> Vec<LatentPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, s).unwrap();
        (0..n)
            .map(|_| LatentPoint::new(c.0 + d.sample(&mut rng), c.1 + d.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn default_grid_has_81_nodes() {
        let g = GridConfig::default();
        assert_eq!(g.nodes(), 81);
        assert_abs_diff_eq!(g.coord(40), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.coord(80), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn renormalized_to_unit_mass() {
        let pts = cloud(200, (0.5, -1.0), 0.7, 1);
        let d = class_density(&pts, 3, &GridConfig::default()).unwrap();
        assert_abs_diff_eq!(d.riemann_sum(), 1.0, epsilon = 1e-9);
        assert!(d.values.iter().all(|&v| v >= 0.0));
        assert_eq!(d.values.dim(), (81, 81));
    }

    #[test]
    fn grid_matches_direct_kernel_sum() {
        let pts = cloud(50, (0.0, 0.3), 1.0, 2);
        let grid = GridConfig::default();
        let d = class_density(&pts, 0, &grid).unwrap();
        // Renormalization rescales every node by the same factor.
        let raw = |i: usize, j: usize| {
            kde_at(&pts, d.bandwidth, LatentPoint::new(grid.coord(i), grid.coord(j)))
        };
        let scale = d.values[[40, 43]] / raw(40, 43);
        for &(i, j) in &[(10, 70), (33, 41), (60, 5), (80, 80)] {
            assert_abs_diff_eq!(d.values[[i, j]], scale * raw(i, j), epsilon = 1e-12);
        }
        let (h1, h2) = d.bandwidth;
        let p = pts[7];
        let manual: f64 = pts
            .iter()
            .map(|q| {
                let a = (p.z1 - q.z1) / h1;
                let b = (p.z2 - q.z2) / h2;
                (-(a * a + b * b) / 2.0).exp() / (2.0 * PI * h1 * h2)
            })
            .sum::<f64>()
            / 50.0;
        assert_abs_diff_eq!(kde_at(&pts, d.bandwidth, p), manual, epsilon = 1e-14);
    }

    #[test]
    fn point_mass_stays_on_its_node() {
        let grid = GridConfig::default();
        let z0 = LatentPoint::new(grid.coord(52), grid.coord(17));
        let pts = vec![z0; 12];
        let d = class_density(&pts, 1, &grid).unwrap();
        assert_eq!(d.bandwidth, (BANDWIDTH_FLOOR, BANDWIDTH_FLOOR));
        let area = grid.step * grid.step;
        assert_abs_diff_eq!(d.values[[52, 17]] * area, 1.0, epsilon = 1e-12);
        let e = expected_latent(&d);
        assert_abs_diff_eq!(e.z1, z0.z1, epsilon = 1e-12);
        assert_abs_diff_eq!(e.z2, z0.z2, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_density_centers_on_origin() {
        let mut pts = Vec::new();
        for p in cloud(40, (0.8, 0.4), 0.5, 3) {
            pts.push(p);
            pts.push(LatentPoint::new(-p.z1, -p.z2));
        }
        let d = class_density(&pts, 0, &GridConfig::default()).unwrap();
        let e = expected_latent(&d);
        assert_abs_diff_eq!(e.z1, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.z2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn expected_latent_tracks_sample_mean() {
        let pts = cloud(500, (1.2, -0.7), 0.6, 4);
        let d = class_density(&pts, 0, &GridConfig::default()).unwrap();
        let e = expected_latent(&d);
        let m1 = pts.iter().map(|p| p.z1).sum::<f64>() / 500.0;
        let m2 = pts.iter().map(|p| p.z2).sum::<f64>() / 500.0;
        assert!(e.distance(&LatentPoint::new(m1, m2)) <= 0.1);
    }

    #[test]
    fn errors() {
        let grid = GridConfig::default();
        assert!(class_density(&cloud(9, (0.0, 0.0), 1.0, 5), 0, &grid).is_err());
        let far = vec![LatentPoint::new(50.0, 50.0); 10];
        assert!(class_density(&far, 0, &grid).is_err());
    }

    proptest! {
        #[test]
        fn expected_latent_inside_the_domain(
            cx in -6.0f64..6.0, cy in -6.0f64..6.0, s in 0.05f64..3.0, seed in 0u64..1000,
        ) {
            let pts = cloud(30, (cx, cy), s, seed);
            let grid = GridConfig::default();
            if let Ok(d) = class_density(&pts, 0, &grid) {
                prop_assert!((d.riemann_sum() - 1.0).abs() < 1e-9);
                prop_assert!(grid.contains(&expected_latent(&d)));
            }
        }
    }
}

use crate::{Error, Result};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn directed(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    from.iter()
        .map(|a| to.iter().map(|b| dist(a, b)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Euclidean Hausdorff distance between two point sets, by brute force.
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "Hausdorff distance needs two non-empty sets".into(),
        ));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != dim) {
        return Err(Error::Shape("points differ in dimension".into()));
    }
    Ok(directed(a, b).max(directed(b, a)))
}

//! How well the latent plane keeps classes apart.

use super::LatentPoint;
use crate::experiments::median;
use crate::{Error, Result};

/// Medians of within-class and between-class pairwise distances over the
/// first `limit` points.
pub fn pairwise_distance_medians(
    points: &[LatentPoint],
    labels: &[u8],
    limit: usize,
) -> Result<(f64, f64)> {
    if points.len() != labels.len() {
        return Err(Error::Shape("points and labels differ in length".into()));
    }
    let n = points.len().min(limit);
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i + 1..n {
            let d = points[i].distance(&points[j]);
            if labels[i] == labels[j] {
                within.push(d);
            } else {
                between.push(d);
            }
        }
    }
    match (median(&within), median(&between)) {
        (Some(w), Some(b)) => Ok((w, b)),
        _ => Err(Error::InvalidInput(
            "need pairs from the same and from different classes".into(),
        )),
    }
}

/// Fraction of `queries` whose nearest reference point carries the same label.
pub fn nearest_neighbor_agreement(
    reference: &[LatentPoint],
    reference_labels: &[u8],
    queries: &[LatentPoint],
    query_labels: &[u8],
) -> Result<f64> {
    if reference.is_empty() || queries.is_empty() {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    if reference.len() != reference_labels.len() || queries.len() != query_labels.len() {
        return Err(Error::Shape("points and labels differ in length".into()));
    }
    let hits = queries
        .iter()
        .zip(query_labels)
        .filter(|(q, &l)| {
            let mut best = (f64::INFINITY, 0u8);
            for (r, &rl) in reference.iter().zip(reference_labels) {
                let d = (q.z1 - r.z1).powi(2) + (q.z2 - r.z2).powi(2);
                if d < best.0 {
                    best = (d, rl);
                }
            }
            best.1 == l
        })
        .count();
    Ok(hits as f64 / queries.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_clusters() {
        let pts = vec![
            LatentPoint::new(0.0, 0.0),
            LatentPoint::new(0.1, 0.0),
            LatentPoint::new(5.0, 5.0),
            LatentPoint::new(5.0, 5.2),
        ];
        let labels = [0, 0, 1, 1];
        let (w, b) = pairwise_distance_medians(&pts, &labels, 10).unwrap();
        assert!(w < b);
        let q = [LatentPoint::new(0.2, 0.1), LatentPoint::new(4.0, 4.0)];
        assert_eq!(nearest_neighbor_agreement(&pts, &labels, &q, &[0, 0]).unwrap(), 0.5);
    }
}

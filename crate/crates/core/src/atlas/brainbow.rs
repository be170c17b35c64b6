use super::ExpectedPattern;
use crate::{Error, Result};

pub type Rgb = [f64; 3];

pub const NEUTRAL_GRAY: Rgb = [0.5, 0.5, 0.5];

/// Ten well-separated class colours.
pub const CLASS_PALETTE: [Rgb; 10] = [
    [0.122, 0.467, 0.706],
    [1.000, 0.498, 0.055],
    [0.173, 0.627, 0.173],
    [0.839, 0.153, 0.157],
    [0.580, 0.404, 0.741],
    [0.549, 0.337, 0.294],
    [0.890, 0.467, 0.761],
    [0.498, 0.498, 0.498],
    [0.737, 0.741, 0.133],
    [0.090, 0.745, 0.812],
];

/// Per-unit colour: the class colours mixed in proportion to each class's
/// expected activation, negative activations counted as zero.
pub fn brainbow(patterns: &[ExpectedPattern], palette: &[Rgb]) -> Result<Vec<Rgb>> {
    if palette.len() != patterns.len() {
        return Err(Error::InvalidInput(format!(
            "palette has {} colours for {} classes",
            palette.len(),
            patterns.len()
        )));
    }
    if palette.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::InvalidInput("palette colours must lie in [0, 1]".into()));
    }
    let Some(first) = patterns.first() else {
        return Ok(Vec::new());
    };
    let units = first.e_h.len();
    if patterns.iter().any(|p| p.e_h.len() != units) {
        return Err(Error::Shape("patterns differ in length".into()));
    }
    Ok((0..units)
        .map(|i| {
            let mut rgb = [0.0; 3];
            let mut total = 0.0;
            for (p, c) in patterns.iter().zip(palette) {
                let w = (p.e_h[i] as f64).max(0.0);
                total += w;
                for d in 0..3 {
                    rgb[d] += w * c[d];
                }
            }
            if total > 0.0 && total.is_finite() {
                rgb.map(|v| (v / total).clamp(0.0, 1.0))
            } else {
                NEUTRAL_GRAY
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::introspector::LatentPoint;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn patterns(values: Vec<Vec<f32>>) -> Vec<ExpectedPattern> {
        values
            .into_iter()
            .enumerate()
            .map(|(k, e_h)| ExpectedPattern {
                class: k,
                e_z: LatentPoint::new(0.0, 0.0),
                e_h,
            })
            .collect()
    }

    #[test]
    fn single_class_response_gives_its_colour() {
        let mut v = vec![vec![0.0f32, -0.3]; 10];
        v[4] = vec![2.5, -0.1];
        let c = brainbow(&patterns(v), &CLASS_PALETTE).unwrap();
        assert_eq!(c[0], CLASS_PALETTE[4]);
        assert_eq!(c[1], NEUTRAL_GRAY);
    }

    #[test]
    fn uniform_response_gives_palette_mean() {
        let c = brainbow(&patterns(vec![vec![0.7f32]; 10]), &CLASS_PALETTE).unwrap();
        for d in 0..3 {
            let mean = CLASS_PALETTE.iter().map(|p| p[d]).sum::<f64>() / 10.0;
            assert_abs_diff_eq!(c[0][d], mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn weighted_mix_of_two() {
        let red = [1.0, 0.0, 0.0];
        let blue = [0.0, 0.0, 1.0];
        let c = brainbow(&patterns(vec![vec![1.0], vec![3.0]]), &[red, blue]).unwrap();
        assert_eq!(c[0], [0.25, 0.0, 0.75]);
    }

    #[test]
    fn palette_size_must_match() {
        assert!(brainbow(&patterns(vec![vec![1.0]; 3]), &CLASS_PALETTE).is_err());
    }

    proptest! {
        #[test]
        fn colours_stay_in_gamut(
            values in prop::collection::vec(prop::collection::vec(-5.0f32..5.0, 6), 10),
        ) {
            for c in brainbow(&patterns(values), &CLASS_PALETTE).unwrap() {
                prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

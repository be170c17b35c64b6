//! Class-conditional maps of the latent plane and what they say about
//! individual hidden units.

mod brainbow;
mod density;
mod units;

pub use brainbow::{brainbow, Rgb, CLASS_PALETTE, NEUTRAL_GRAY};
pub use density::{
    class_density, class_density_with, expected_latent, kde_at, silverman_bandwidth,
    DensityGrid, GridConfig, BANDWIDTH_FLOOR, MIN_DENSITY_POINTS,
};
pub use units::{
    apply_permutation, expected_activation, expected_patterns, permute_hidden_units, sort_units,
    ExpectedPattern, UnitAssignment,
};

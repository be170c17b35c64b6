//! MNIST ingestion and dataset utilities.

mod hausdorff;
mod idx;
mod noise;
mod split;

pub use hausdorff::hausdorff_distance;
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, parse_idx};
pub use noise::add_awgn;
pub use split::{split, split_indices, SplitIndices, SplitSpec};

use ndarray::{Array2, ArrayView1, Axis};

use crate::{Error, Result};

pub const IMAGE_SIDE: usize = 28;
pub const INPUT_WIDTH: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

/// Images as rows of `inputs` (values in `[0, 1]` when loaded from IDX) with
/// their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Array2<f32>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(inputs: Array2<f32>, labels: Vec<u8>) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} inputs but {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        if inputs.ncols() != INPUT_WIDTH {
            return Err(Error::InvalidInput(format!(
                "inputs have width {}, expected {INPUT_WIDTH}",
                inputs.ncols()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::InvalidInput(format!("label {l} out of range")));
        }
        if !inputs.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite input value".into()));
        }
        Ok(Dataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &Array2<f32> {
        &self.inputs
    }

    pub fn input(&self, i: usize) -> ArrayView1<'_, f32> {
        self.inputs.row(i)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Rows `indices` of the inputs, stacked.
    pub fn batch_inputs(&self, indices: &[usize]) -> Array2<f32> {
        self.inputs.select(Axis(0), indices)
    }

    /// One-hot targets for `indices`.
    pub fn batch_targets(&self, indices: &[usize]) -> Array2<f32> {
        let mut t = Array2::zeros((indices.len(), NUM_CLASSES));
        for (r, &i) in indices.iter().enumerate() {
            t[[r, self.labels[i] as usize]] = 1.0;
        }
        t
    }

    pub fn one_hot(&self, i: usize) -> [f32; NUM_CLASSES] {
        let mut t = [0.0; NUM_CLASSES];
        t[self.labels[i] as usize] = 1.0;
        t
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.batch_inputs(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// The first `n` samples, in order.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        self.subset(&(0..n).collect::<Vec<_>>())
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }
}

use ndarray::{concatenate, Array2, ArrayView1, Axis};

use crate::{Error, Result};

/// Hidden-activation records, stored column-wise: row `i` of `hidden` and
/// `outputs` belongs to record `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecords {
    /// Index of each record's sample in the dataset it came from.
    pub sample_ids: Vec<usize>,
    /// Concatenated hidden layers, `n x N_h`.
    pub hidden: Array2<f32>,
    pub labels: Vec<u8>,
    /// Classifier outputs, `n x 10`.
    pub outputs: Array2<f32>,
    /// `(1/2) |y - y_hat|^2` per record.
    pub errors: Vec<f64>,
    /// Training cycle a snapshot was taken at, if any.
    pub cycles: Vec<Option<usize>>,
}

/// One record, borrowed.
#[derive(Debug, Clone, Copy)]
pub struct ActivationRecord<'a> {
    pub sample_id: usize,
    pub h: ArrayView1<'a, f32>,
    pub y_true: usize,
    pub y_hat: ArrayView1<'a, f32>,
    pub e: f64,
    pub cycle: Option<usize>,
}

/// Half squared error against the one-hot target for `label`, in f64.
pub fn half_squared_error(y_hat: ArrayView1<f32>, label: usize) -> f64 {
    y_hat
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let t = if k == label { 1.0 } else { 0.0 };
            let d = t - v as f64;
            d * d
        })
        .sum::<f64>()
        * 0.5
}

impl ActivationRecords {
    pub fn empty(hidden_width: usize, output_width: usize) -> Self {
        ActivationRecords {
            sample_ids: Vec::new(),
            hidden: Array2::zeros((0, hidden_width)),
            labels: Vec::new(),
            outputs: Array2::zeros((0, output_width)),
            errors: Vec::new(),
            cycles: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden.ncols()
    }

    pub fn get(&self, i: usize) -> ActivationRecord<'_> {
        ActivationRecord {
            sample_id: self.sample_ids[i],
            h: self.hidden.row(i),
            y_true: self.labels[i] as usize,
            y_hat: self.outputs.row(i),
            e: self.errors[i],
            cycle: self.cycles[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ActivationRecord<'_>> {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn select(&self, indices: &[usize]) -> ActivationRecords {
        ActivationRecords {
            sample_ids: indices.iter().map(|&i| self.sample_ids[i]).collect(),
            hidden: self.hidden.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            outputs: self.outputs.select(Axis(0), indices),
            errors: indices.iter().map(|&i| self.errors[i]).collect(),
            cycles: indices.iter().map(|&i| self.cycles[i]).collect(),
        }
    }

    pub fn append(&mut self, other: ActivationRecords) -> Result<()> {
        if other.hidden_width() != self.hidden_width() || other.outputs.ncols() != self.outputs.ncols()
        {
            return Err(Error::Shape("appending records of a different width".into()));
        }
        self.sample_ids.extend(other.sample_ids);
        self.hidden = concatenate(Axis(0), &[self.hidden.view(), other.hidden.view()])
            .expect("widths checked");
        self.labels.extend(other.labels);
        self.outputs = concatenate(Axis(0), &[self.outputs.view(), other.outputs.view()])
            .expect("widths checked");
        self.errors.extend(other.errors);
        self.cycles.extend(other.cycles);
        Ok(())
    }
}

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Stack;
use crate::datasets::{Dataset, NUM_CLASSES};
use crate::Result;

/// Estimated log10 errors of one true class, split by whether the
/// classifier got the sample right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinClass {
    pub class: usize,
    pub correct: Vec<f64>,
    pub correct_ids: Vec<usize>,
    pub misclassified: Vec<f64>,
    pub misclassified_ids: Vec<usize>,
}

impl ViolinClass {
    pub fn len(&self) -> usize {
        self.correct.len() + self.misclassified.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fraction of the class classified correctly; `None` for an empty class.
    pub fn sensitivity(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.correct.len() as f64 / self.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinReport {
    pub classes: Vec<ViolinClass>,
}

/// Median with the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

impl ViolinReport {
    pub fn total(&self) -> usize {
        self.classes.iter().map(ViolinClass::len).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: usize = self.classes.iter().map(|c| c.correct.len()).sum();
        correct as f64 / self.total().max(1) as f64
    }

    pub fn all_correct(&self) -> Vec<f64> {
        self.classes.iter().flat_map(|c| c.correct.iter().copied()).collect()
    }

    pub fn all_misclassified(&self) -> Vec<f64> {
        self.classes
            .iter()
            .flat_map(|c| c.misclassified.iter().copied())
            .collect()
    }

    /// Median estimate over misclassified samples minus the median over
    /// correct ones, pooled over classes.
    pub fn median_gap(&self) -> Option<f64> {
        Some(median(&self.all_misclassified())? - median(&self.all_correct())?)
    }

    /// One row per sample.
    pub fn samples_csv(&self) -> String {
        let mut rows: Vec<(usize, usize, bool, f64)> = Vec::with_capacity(self.total());
        for c in &self.classes {
            rows.extend(c.correct_ids.iter().zip(&c.correct).map(|(&i, &e)| (i, c.class, true, e)));
            rows.extend(
                c.misclassified_ids
                    .iter()
                    .zip(&c.misclassified)
                    .map(|(&i, &e)| (i, c.class, false, e)),
            );
        }
        rows.sort_by_key(|r| r.0);
        let mut out = String::from("sample_id,class,correct,e_log10\n");
        for (i, k, ok, e) in rows {
            writeln!(out, "{i},{k},{},{e}", ok as u8).unwrap();
        }
        out
    }

    /// One row per class; empty distributions leave their cells blank.
    pub fn summary_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(
            "class,n_correct,n_misclassified,sensitivity,median_correct,median_misclassified\n",
        );
        for c in &self.classes {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.class,
                c.correct.len(),
                c.misclassified.len(),
                cell(c.sensitivity()),
                cell(median(&c.correct)),
                cell(median(&c.misclassified)),
            )
            .unwrap();
        }
        out
    }
}

pub fn violin_report(stack: Stack<'_>, test: &Dataset) -> Result<ViolinReport> {
    let r = stack.read(test.inputs().view())?;
    let mut classes: Vec<ViolinClass> = (0..NUM_CLASSES)
        .map(|class| ViolinClass {
            class,
            correct: Vec::new(),
            correct_ids: Vec::new(),
            misclassified: Vec::new(),
            misclassified_ids: Vec::new(),
        })
        .collect();
    for i in 0..test.len() {
        let c = &mut classes[test.label(i)];
        if r.labels[i] == test.label(i) {
            c.correct.push(r.e_log10[i]);
            c.correct_ids.push(i);
        } else {
            c.misclassified.push(r.e_log10[i]);
            c.misclassified_ids.push(i);
        }
    }
    Ok(ViolinReport { classes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::tests::random_stack;
    use approx::assert_abs_diff_eq;

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn buckets_partition_the_test_set() {
        let owned = random_stack(12);
        let data = crate::classifier::tests::toy_dataset(57, 5);
        let rep = violin_report(owned.stack(), &data).unwrap();
        assert_eq!(rep.total(), 57);
        let mut ids: Vec<usize> = rep
            .classes
            .iter()
            .flat_map(|c| c.correct_ids.iter().chain(&c.misclassified_ids).copied())
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..57).collect::<Vec<_>>());
        for c in &rep.classes {
            assert!(c.correct_ids.iter().chain(&c.misclassified_ids).all(|&i| data.label(i) == c.class));
        }
        // Class-weighted sensitivity is the overall accuracy.
        let weighted: f64 = rep
            .classes
            .iter()
            .filter_map(|c| c.sensitivity().map(|s| s * c.len() as f64))
            .sum::<f64>()
            / 57.0;
        assert_abs_diff_eq!(weighted, owned.classifier.accuracy(&data).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(rep.accuracy(), weighted, epsilon = 1e-12);
        assert_eq!(rep.samples_csv().lines().count(), 58);
        assert_eq!(rep.summary_csv().lines().count(), 11);
    }

    #[test]
    fn empty_class_is_flagged_not_fatal() {
        let owned = random_stack(13);
        let data = crate::classifier::tests::toy_dataset(9, 5);
        let rep = violin_report(owned.stack(), &data).unwrap();
        assert!(rep.classes[9].is_empty());
        assert_eq!(rep.classes[9].sensitivity(), None);
        assert!(rep.summary_csv().lines().last().unwrap().starts_with("9,0,0,,,"));
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, NUM_CLASSES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_count: usize,
    pub val_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

/// Index sets of a split; pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `total` across classes in proportion to `available`, by largest
/// remainder with ties to the lower class. Never exceeds `available`.
fn apportion(total: usize, available: &[usize; NUM_CLASSES]) -> [usize; NUM_CLASSES] {
    let pool: usize = available.iter().sum();
    let mut out = [0; NUM_CLASSES];
    if pool == 0 || total == 0 {
        return out;
    }
    let mut rema: Vec<(usize, usize)> = Vec::with_capacity(NUM_CLASSES);
    for c in 0..NUM_CLASSES {
        let exact = total * available[c];
        out[c] = exact / pool;
        rema.push((exact % pool, c));
    }
    let assigned: usize = out.iter().sum();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(r, c) in rema.iter().take(total - assigned) {
        debug_assert!(r > 0 && out[c] < available[c]);
        out[c] += 1;
    }
    out
}

/// Seeded, class-stratified partition of `labels` into three disjoint sets.
pub fn split_indices(labels: &[u8], spec: &SplitSpec) -> Result<SplitIndices> {
    let wanted = spec.train_count + spec.val_count + spec.test_count;
    if wanted > labels.len() {
        return Err(Error::InvalidConfig(format!(
            "split asks for {wanted} samples but only {} are available",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut rng);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for &i in &order {
        by_class[labels[i] as usize].push(i);
    }
    let mut available = [0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        available[c] = by_class[c].len();
    }
    let selected = apportion(wanted, &available);
    let train_q = apportion(spec.train_count, &selected);
    let mut remaining = selected;
    for c in 0..NUM_CLASSES {
        remaining[c] -= train_q[c];
    }
    let val_q = apportion(spec.val_count, &remaining);

    let mut parts = [Vec::new(), Vec::new(), Vec::new()];
    for c in 0..NUM_CLASSES {
        let mut it = by_class[c].iter().copied();
        parts[0].extend(it.by_ref().take(train_q[c]));
        parts[1].extend(it.by_ref().take(val_q[c]));
        parts[2].extend(it.take(remaining[c] - val_q[c]));
    }
    for p in &mut parts {
        p.shuffle(&mut rng);
    }
    let [train, val, test] = parts;
    Ok(SplitIndices { train, val, test })
}

pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let idx = split_indices(data.labels(), spec)?;
    Ok((
        data.subset(&idx.train),
        data.subset(&idx.val),
        data.subset(&idx.test),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn labels(n: usize) -> Vec<u8> {
        (0..n).map(|i| ((i * 7 + i / 3) % 10) as u8).collect()
    }

    #[test]
    fn deterministic() {
        let l = labels(40);
        let spec = SplitSpec {
            train_count: 10,
            val_count: 5,
            test_count: 5,
            seed: 7,
        };
        assert_eq!(split_indices(&l, &spec).unwrap(), split_indices(&l, &spec).unwrap());
    }

    #[test]
    fn oversubscription_is_an_error() {
        let spec = SplitSpec {
            train_count: 30,
            val_count: 10,
            test_count: 1,
            seed: 0,
        };
        assert!(split_indices(&labels(40), &spec).is_err());
    }

    #[test]
    fn apportion_never_overdraws() {
        let avail = [3, 0, 1, 7, 2, 2, 9, 1, 1, 4];
        let total: usize = avail.iter().sum();
        assert_eq!(apportion(total, &avail), avail);
        let q = apportion(13, &avail);
        assert_eq!(q.iter().sum::<usize>(), 13);
        assert!(q.iter().zip(&avail).all(|(a, b)| a <= b));
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_complete(
            n in 10usize..300,
            frac in prop::array::uniform3(0.0f64..0.34),
            seed in any::<u64>(),
        ) {
            let l = labels(n);
            let spec = SplitSpec {
                train_count: (n as f64 * frac[0]) as usize,
                val_count: (n as f64 * frac[1]) as usize,
                test_count: (n as f64 * frac[2]) as usize,
                seed,
            };
            let s = split_indices(&l, &spec).unwrap();
            prop_assert_eq!(s.train.len(), spec.train_count);
            prop_assert_eq!(s.val.len(), spec.val_count);
            prop_assert_eq!(s.test.len(), spec.test_count);
            let all: HashSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            prop_assert_eq!(all.len(), s.train.len() + s.val.len() + s.test.len());
            prop_assert!(all.iter().all(|&i| i < n));
        }
    }
}

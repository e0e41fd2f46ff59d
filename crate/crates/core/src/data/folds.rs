//! K-fold partitioning with rotating train/validation/test roles: rotation
//! `r` tests on fold `r`, validates on fold `(r+1) mod k`, and trains on the
//! remaining `k-2` folds, so every sample is tested exactly once.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::stream;

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldRoles {
    pub test_fold: usize,
    pub val_fold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    /// Fold index per sample.
    pub assignments: Vec<usize>,
}

impl FoldSplit {
    /// Seeded shuffle then round-robin assignment; fold sizes differ by at
    /// most one.
    pub fn new(n_samples: usize, k: usize, seed: u64) -> Result<FoldSplit, DataError> {
        if k < 2 {
            return Err(DataError::BadFoldCount(k));
        }
        if n_samples < k {
            return Err(DataError::TooFewSamples { n: n_samples, k });
        }
        let mut order: Vec<usize> = (0..n_samples).collect();
        order.shuffle(&mut stream(seed, &[0x666f6c64]));
        let mut assignments = vec![0usize; n_samples];
        for (pos, &sample) in order.iter().enumerate() {
            assignments[sample] = pos % k;
        }
        Ok(FoldSplit { k, assignments })
    }

    /// Class-stratified variant: samples of each class are dealt round-robin
    /// across folds, with the fold cursor carried between classes so overall
    /// sizes stay within one.
    pub fn stratified(labels: &[usize], k: usize, seed: u64) -> Result<FoldSplit, DataError> {
        if k < 2 {
            return Err(DataError::BadFoldCount(k));
        }
        if labels.len() < k {
            return Err(DataError::TooFewSamples {
                n: labels.len(),
                k,
            });
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
        for (i, &label) in labels.iter().enumerate() {
            per_class[label].push(i);
        }
        let mut rng = stream(seed, &[0x73747261]);
        let mut assignments = vec![0usize; labels.len()];
        let mut cursor = 0usize;
        for class in per_class.iter_mut() {
            class.shuffle(&mut rng);
            for &sample in class.iter() {
                assignments[sample] = cursor % k;
                cursor += 1;
            }
        }
        Ok(FoldSplit { k, assignments })
    }

    pub fn roles(&self, rotation: usize) -> FoldRoles {
        assert!(rotation < self.k, "rotation {rotation} out of range");
        FoldRoles {
            test_fold: rotation,
            val_fold: (rotation + 1) % self.k,
        }
    }

    /// Sample indices for (train, validation, test) under a rotation.
    pub fn role_indices(&self, rotation: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let FoldRoles {
            test_fold,
            val_fold,
        } = self.roles(rotation);
        let mut train = Vec::new();
        let mut val = Vec::new();
        let mut test = Vec::new();
        for (i, &fold) in self.assignments.iter().enumerate() {
            if fold == test_fold {
                test.push(i);
            } else if fold == val_fold {
                val.push(i);
            } else {
                train.push(i);
            }
        }
        (train, val, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn ten_samples_five_folds() {
        let split = FoldSplit::new(10, 5, 0).unwrap();
        assert_eq!(split.fold_sizes(), vec![2; 5]);
        for r in 0..5 {
            let (train, val, test) = split.role_indices(r);
            assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));
        }
    }

    #[test]
    fn rotations_test_every_sample_exactly_once() {
        let split = FoldSplit::new(53, 5, 3).unwrap();
        let mut tested = Vec::new();
        for r in 0..5 {
            let (_, _, test) = split.role_indices(r);
            tested.extend(test);
        }
        tested.sort_unstable();
        assert_eq!(tested, (0..53).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_reproduces_split() {
        assert_eq!(
            FoldSplit::new(40, 5, 9).unwrap(),
            FoldSplit::new(40, 5, 9).unwrap()
        );
        assert_ne!(
            FoldSplit::new(40, 5, 9).unwrap(),
            FoldSplit::new(40, 5, 10).unwrap()
        );
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(matches!(
            FoldSplit::new(3, 5, 0),
            Err(DataError::TooFewSamples { n: 3, k: 5 })
        ));
        assert!(matches!(
            FoldSplit::new(10, 1, 0),
            Err(DataError::BadFoldCount(1))
        ));
    }

    #[test]
    fn stratified_balances_classes_and_sizes() {
        // 3 classes x 7 samples, k = 5
        let labels: Vec<usize> = (0..21).map(|i| i / 7).collect();
        let split = FoldSplit::stratified(&labels, 5, 1).unwrap();
        let sizes = split.fold_sizes();
        let (min, max) = (
            *sizes.iter().min().unwrap(),
            *sizes.iter().max().unwrap(),
        );
        assert!(max - min <= 1, "sizes {sizes:?}");
        // per class, folds hold either floor or ceil of class_size / k
        for class in 0..3 {
            let mut per_fold = vec![0usize; 5];
            for (i, &l) in labels.iter().enumerate() {
                if l == class {
                    per_fold[split.assignments[i]] += 1;
                }
            }
            let (mn, mx) = (
                *per_fold.iter().min().unwrap(),
                *per_fold.iter().max().unwrap(),
            );
            assert!(mx - mn <= 1, "class {class} spread {per_fold:?}");
        }
    }

    proptest! {
        #[test]
        fn partition_properties(n in 5usize..200, seed in 0u64..500) {
            let k = 5usize.min(n);
            let split = FoldSplit::new(n, k, seed).unwrap();
            // coverage + disjointness: every sample has exactly one fold
            prop_assert_eq!(split.assignments.len(), n);
            prop_assert!(split.assignments.iter().all(|&f| f < k));
            // balance within 1
            let sizes = split.fold_sizes();
            let min = *sizes.iter().min().unwrap();
            let max = *sizes.iter().max().unwrap();
            prop_assert!(max - min <= 1);
            // each rotation assigns each sample exactly one role
            for r in 0..k {
                let (train, val, test) = split.role_indices(r);
                let mut all: Vec<usize> = train.iter().chain(&val).chain(&test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                let train_set: HashSet<_> = train.iter().collect();
                prop_assert!(val.iter().all(|i| !train_set.contains(i)));
            }
        }
    }
}

//! Train/validation partitions.

use super::DatasetError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified k-fold partition of item indices by class label.
///
/// Members of each class are shuffled and dealt round-robin over the folds,
/// continuing the dealing position across classes so fold sizes differ by at
/// most one.
pub fn k_fold_split(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>, DatasetError> {
    if k < 2 || k > labels.len() {
        return Err(DatasetError::InvalidParams(format!(
            "k = {k} must satisfy 2 <= k <= {}",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(DatasetError::ClassTooSmall {
            class,
            count: members.len(),
            k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let mut validation = folds[f].clone();
            validation.sort_unstable();
            let mut train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            Fold { train, validation }
        })
        .collect())
}

/// Shuffled split of `0..n` into three equal parts (train, validation, test).
pub fn train_val_test_split(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), DatasetError> {
    if n % 3 != 0 || n == 0 {
        return Err(DatasetError::NotDivisible(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let third = n / 3;
    let test = idx.split_off(2 * third);
    let val = idx.split_off(third);
    Ok((idx, val, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hundred_items_ten_folds() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let folds = k_fold_split(&labels, 10, 3).unwrap();
        assert!(folds.iter().all(|f| f.validation.len() == 10 && f.train.len() == 90));
    }

    #[test]
    fn stratified_sixty_forty() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 60)).collect();
        for f in k_fold_split(&labels, 10, 1).unwrap() {
            let ones = f.validation.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!((f.validation.len() - ones, ones), (6, 4));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        assert_eq!(k_fold_split(&labels, 5, 9).unwrap(), k_fold_split(&labels, 5, 9).unwrap());
        assert_ne!(k_fold_split(&labels, 5, 9).unwrap(), k_fold_split(&labels, 5, 10).unwrap());
    }

    #[test]
    fn small_class_rejected() {
        let labels = vec![0, 0, 0, 0, 1];
        assert!(matches!(
            k_fold_split(&labels, 2, 0),
            Err(DatasetError::ClassTooSmall { class: 1, count: 1, k: 2 })
        ));
        assert!(k_fold_split(&labels, 1, 0).is_err());
    }

    #[test]
    fn thirds() {
        let (a, b, c) = train_val_test_split(300, 0).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (100, 100, 100));
        let (a, b, c) = train_val_test_split(3, 0).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (1, 1, 1));
        assert!(matches!(train_val_test_split(10, 0), Err(DatasetError::NotDivisible(10))));
    }

    proptest! {
        #[test]
        fn folds_partition_items(n in 20usize..120, k in 2usize..6, classes in 1usize..4, seed in 0u64..100) {
            let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
            let folds = k_fold_split(&labels, k, seed).unwrap();
            let mut seen = vec![0; n];
            for f in &folds {
                for &i in &f.validation {
                    seen[i] += 1;
                    prop_assert!(f.train.binary_search(&i).is_err());
                }
                prop_assert_eq!(f.train.len() + f.validation.len(), n);
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn thirds_partition(m in 1usize..60, seed in 0u64..50) {
            let (a, b, c) = train_val_test_split(3 * m, seed).unwrap();
            let mut all: Vec<usize> = a.into_iter().chain(b).chain(c).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..3 * m).collect::<Vec<_>>());
        }
    }
}

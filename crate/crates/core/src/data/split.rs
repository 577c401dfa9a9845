use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Dataset};

/// Subject indices of one cross-validation fold, each list ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold split: every class is shuffled and dealt round-robin
/// into the `k` test folds, so per-class fold sizes differ by at most one.
pub fn kfold_split(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>, DataError> {
    if k < 2 {
        return Err(DataError::TooFewSubjects(format!(
            "k = {k} must be at least 2"
        )));
    }
    let labels = ds.labels();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes.max(2)];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(DataError::TooFewSubjects(format!(
                "class {c} has {} subjects, fewer than k = {k}",
                members.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut offset = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for (pos, &idx) in members.iter().enumerate() {
            tests[(offset + pos) % k].push(idx);
        }
        offset = (offset + members.len()) % k;
    }

    let n = labels.len();
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Subject;
    use crate::tensor::Matrix;

    fn cohort(per_class: [usize; 2]) -> Dataset {
        let mut subjects = Vec::new();
        for (label, &count) in per_class.iter().enumerate() {
            for i in 0..count {
                subjects.push(Subject {
                    id: format!("{label}-{i}"),
                    sc: Matrix::zeros(2, 2),
                    fts: Matrix::zeros(2, 1),
                    fv: vec![0.0],
                    label,
                });
            }
        }
        Dataset {
            subjects,
            n_rois: 2,
            fts_dim: 1,
            latent_dim: 1,
            roi_names: vec!["a".into(), "b".into()],
            partition: vec![0, 0],
            planted_edges: None,
        }
    }

    #[test]
    fn ten_folds_of_twenty_hold_one_per_class() {
        let ds = cohort([10, 10]);
        let folds = kfold_split(&ds, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        for f in &folds {
            let labels: Vec<usize> = f.test.iter().map(|&i| ds.subjects[i].label).collect();
            assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 1);
            assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 1);
        }
    }

    #[test]
    fn folds_partition_the_cohort() {
        let ds = cohort([13, 9]);
        let folds = kfold_split(&ds, 4, 11).unwrap();
        let mut seen = vec![0; ds.subjects.len()];
        for f in &folds {
            for &i in &f.test {
                seen[i] += 1;
            }
            assert_eq!(f.train.len() + f.test.len(), ds.subjects.len());
            assert!(f.train.iter().all(|i| !f.test.contains(i)));
        }
        assert!(seen.iter().all(|&c| c == 1));
        for class in 0..2 {
            let sizes: Vec<usize> = folds
                .iter()
                .map(|f| {
                    f.test
                        .iter()
                        .filter(|&&i| ds.subjects[i].label == class)
                        .count()
                })
                .collect();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1, "class {class}: {sizes:?}");
        }
    }

    #[test]
    fn seed_controls_the_permutation() {
        let ds = cohort([10, 10]);
        let base = kfold_split(&ds, 5, 0).unwrap();
        assert_eq!(base, kfold_split(&ds, 5, 0).unwrap());
        for seed in 1..=5 {
            assert_ne!(base, kfold_split(&ds, 5, seed).unwrap(), "seed {seed}");
        }
    }

    #[test]
    fn rejects_too_few_subjects() {
        let ds = cohort([3, 10]);
        assert!(matches!(
            kfold_split(&ds, 4, 0),
            Err(DataError::TooFewSubjects(_))
        ));
        assert!(matches!(
            kfold_split(&ds, 1, 0),
            Err(DataError::TooFewSubjects(_))
        ));
    }
}

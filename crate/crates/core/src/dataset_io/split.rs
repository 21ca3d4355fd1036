use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::schema::{Dataset, Style};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("{folds} folds requested but only {records} records")]
    TooManyFolds { folds: usize, records: usize },
}

/// Image id to fold index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub folds: BTreeMap<u64, usize>,
}

impl FoldAssignment {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for f in self.folds.values() {
            sizes[*f] += 1;
        }
        sizes
    }

    /// Image ids in fold `index`, ascending.
    pub fn fold(&self, index: usize) -> Vec<u64> {
        self.folds
            .iter()
            .filter(|(_, f)| **f == index)
            .map(|(id, _)| *id)
            .collect()
    }
}

/// Seeded shuffle followed by round-robin assignment.
///
/// With `stratify_by_style`, records are shuffled within each style and the styles are dealt
/// one after another, so each style is spread evenly while fold sizes still differ by at most one.
pub fn split_folds(
    dataset: &Dataset,
    k: usize,
    seed: u64,
    stratify_by_style: bool,
) -> Result<FoldAssignment, SplitError> {
    if k < 2 {
        return Err(SplitError::TooFewFolds(k));
    }
    if k > dataset.len() {
        return Err(SplitError::TooManyFolds {
            folds: k,
            records: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<u64> = if stratify_by_style {
        let mut groups: BTreeMap<Style, Vec<u64>> = BTreeMap::new();
        for r in &dataset.records {
            groups.entry(r.style).or_default().push(r.image_id);
        }
        groups
            .into_values()
            .flat_map(|mut ids| {
                ids.shuffle(&mut rng);
                ids
            })
            .collect()
    } else {
        let mut ids: Vec<u64> = dataset.records.iter().map(|r| r.image_id).collect();
        ids.shuffle(&mut rng);
        ids
    };
    let folds = order
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i % k))
        .collect();
    Ok(FoldAssignment {
        k,
        seed,
        stratified: stratify_by_style,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::DiagramRecord;

    fn dataset(n: u64) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| DiagramRecord {
                    image_id: i,
                    file_name: format!("{i}.png"),
                    width: 10,
                    height: 10,
                    style: Style::ALL[(i % 4) as usize],
                    entities: vec![],
                    reactions: vec![],
                })
                .collect(),
        )
    }

    #[test]
    fn published_size_gives_near_equal_folds() {
        let a = split_folds(&dataset(1378), 5, 0, false).unwrap();
        let mut sizes = a.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![275, 275, 276, 276, 276]);
        assert_eq!(a.folds.len(), 1378);
    }

    #[test]
    fn deterministic() {
        let d = dataset(50);
        assert_eq!(
            split_folds(&d, 5, 11, false).unwrap(),
            split_folds(&d, 5, 11, false).unwrap()
        );
        assert_ne!(
            split_folds(&d, 5, 11, false).unwrap(),
            split_folds(&d, 5, 12, false).unwrap()
        );
    }

    #[test]
    fn two_records_two_folds() {
        let a = split_folds(&dataset(2), 2, 3, false).unwrap();
        assert_eq!(a.fold_sizes(), vec![1, 1]);
    }

    #[test]
    fn rejects_bad_k() {
        assert_eq!(
            split_folds(&dataset(3), 4, 0, false),
            Err(SplitError::TooManyFolds {
                folds: 4,
                records: 3
            })
        );
        assert_eq!(
            split_folds(&dataset(3), 1, 0, false),
            Err(SplitError::TooFewFolds(1))
        );
    }

    #[test]
    fn stratified_spreads_styles() {
        let d = dataset(103);
        let a = split_folds(&d, 5, 1, true).unwrap();
        let sizes = a.fold_sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for style in Style::ALL {
            let per_fold: Vec<usize> = (0..5)
                .map(|f| {
                    a.fold(f)
                        .iter()
                        .filter(|id| d.get(**id).unwrap().style == style)
                        .count()
                })
                .collect();
            assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
        }
    }

    proptest::proptest! {
        #[test]
        fn every_record_in_exactly_one_fold(n in 2u64..200, k in 2usize..10, seed: u64, strat: bool) {
            proptest::prop_assume!(k as u64 <= n);
            let d = dataset(n);
            let a = split_folds(&d, k, seed, strat).unwrap();
            proptest::prop_assert_eq!(a.folds.len() as u64, n);
            let sizes = a.fold_sizes();
            proptest::prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            proptest::prop_assert_eq!(sizes.iter().sum::<usize>() as u64, n);
        }
    }
}

use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::seq::SliceRandom;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{self, Stream};

/// Partition of a dataset's ids. `retain ⊎ unlearn = train`; test and
/// validation are disjoint from train and from each other.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<u64>,
    pub retain: Vec<u64>,
    pub unlearn: Vec<u64>,
    pub test: Vec<u64>,
    pub validation: Vec<u64>,
}

impl Splits {
    /// Checks the partition invariants.
    pub fn validate(&self) -> Result<()> {
        let train: BTreeSet<u64> = self.train.iter().copied().collect();
        let retain: BTreeSet<u64> = self.retain.iter().copied().collect();
        let unlearn: BTreeSet<u64> = self.unlearn.iter().copied().collect();
        let test: BTreeSet<u64> = self.test.iter().copied().collect();
        let val: BTreeSet<u64> = self.validation.iter().copied().collect();
        let lens = [
            (train.len(), self.train.len(), "train"),
            (retain.len(), self.retain.len(), "retain"),
            (unlearn.len(), self.unlearn.len(), "unlearn"),
            (test.len(), self.test.len(), "test"),
            (val.len(), self.validation.len(), "validation"),
        ];
        if let Some((_, _, name)) = lens.iter().find(|(a, b, _)| a != b) {
            return Err(Error::InvalidInput(format!("duplicate ids in {name} split")));
        }
        if !retain.is_disjoint(&unlearn) {
            return Err(Error::InvalidInput("retain and unlearn overlap".into()));
        }
        if retain.union(&unlearn).copied().collect::<BTreeSet<_>>() != train {
            return Err(Error::InvalidInput("retain ∪ unlearn differs from train".into()));
        }
        if !train.is_disjoint(&test) || !train.is_disjoint(&val) || !test.is_disjoint(&val) {
            return Err(Error::InvalidInput("train, test and validation overlap".into()));
        }
        Ok(())
    }

    /// `|unlearn| / |retain|`, exact.
    pub fn epsilon(&self) -> Result<Ratio<u64>> {
        if self.retain.is_empty() {
            return Err(Error::Config("retain split is empty".into()));
        }
        Ok(Ratio::new(self.unlearn.len() as u64, self.retain.len() as u64))
    }
}

/// Seeded uniform partition. Test and validation sizes are fractions of the
/// whole dataset; the unlearn size is a fraction of the remaining train ids.
/// Every count is rounded to the nearest integer.
pub fn split<T: Scalar>(
    dataset: &LabeledDataset<T>,
    unlearn_fraction: f64,
    test_fraction: f64,
    val_fraction: f64,
    seed: u64,
) -> Result<Splits> {
    for (name, f) in [
        ("unlearn", unlearn_fraction),
        ("test", test_fraction),
        ("validation", val_fraction),
    ] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("{name} fraction {f} outside (0, 1)")));
        }
    }
    if test_fraction + val_fraction >= 1.0 {
        return Err(Error::Config(
            "test and validation fractions leave no training data".into(),
        ));
    }
    let n = dataset.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let n_val = (n as f64 * val_fraction).round() as usize;
    let n_train = n.saturating_sub(n_test + n_val);
    let n_unlearn = (n_train as f64 * unlearn_fraction).round() as usize;
    let n_retain = n_train.saturating_sub(n_unlearn);
    for (name, count) in [
        ("test", n_test),
        ("validation", n_val),
        ("unlearn", n_unlearn),
        ("retain", n_retain),
    ] {
        if count == 0 {
            return Err(Error::Config(format!(
                "{name} split would be empty for {n} samples"
            )));
        }
    }

    let mut ids = dataset.ids().to_vec();
    ids.shuffle(&mut seed::rng(seed, Stream::Split, &[]));
    let (test, rest) = ids.split_at(n_test);
    let (validation, train) = rest.split_at(n_val);
    let (unlearn, retain) = train.split_at(n_unlearn);

    let sorted = |s: &[u64]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    let splits = Splits {
        train: sorted(train),
        retain: sorted(retain),
        unlearn: sorted(unlearn),
        test: sorted(test),
        validation: sorted(validation),
    };
    splits.validate()?;
    Ok(splits)
}

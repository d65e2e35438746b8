//! Datasets, deterministic splits and the two-view augmentation pipeline.

mod augment;
mod cifar;
mod split;
mod synthetic;

pub use augment::{augment_pair, augment_views, paired_batch, AugmentorConfig, ViewSeed};
pub use cifar::{load_cifar10, CIFAR_PIXELS, CIFAR_RECORD, CIFAR_RECORDS_PER_FILE};
pub use split::{split, Splits};
pub use synthetic::gen_synthetic;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Labeled samples with stable integer identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    samples: Matrix<T>,
    labels: Vec<usize>,
    ids: Vec<u64>,
    num_classes: usize,
    index: HashMap<u64, usize>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(
        samples: Matrix<T>,
        labels: Vec<usize>,
        ids: Vec<u64>,
        num_classes: usize,
    ) -> Result<Self> {
        if labels.len() != samples.rows() || ids.len() != samples.rows() {
            return Err(Error::InvalidInput(format!(
                "{} samples, {} labels, {} ids",
                samples.rows(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, &id) in ids.iter().enumerate() {
            if index.insert(id, row).is_some() {
                return Err(Error::InvalidInput(format!("duplicate sample id {id}")));
            }
        }
        Ok(Self {
            samples,
            labels,
            ids,
            num_classes,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn samples(&self) -> &Matrix<T> {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn sample(&self, row: usize) -> &[T] {
        self.samples.row(row)
    }

    pub fn row_of(&self, id: u64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Row indices of the given ids, in order.
    pub fn rows_of(&self, ids: &[u64]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|&id| {
                self.row_of(id)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown sample id {id}")))
            })
            .collect()
    }

    /// Samples, labels and ids of the given id list.
    pub fn subset(&self, ids: &[u64]) -> Result<Self> {
        let rows = self.rows_of(ids)?;
        Self::new(
            self.samples.select_rows(&rows),
            rows.iter().map(|&r| self.labels[r]).collect(),
            ids.to_vec(),
            self.num_classes,
        )
    }
}

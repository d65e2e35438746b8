//! Alignment matrices, the forgetting score and negative-alignment statistics.
//!
//! Everything here uses raw cosine similarity, never a temperature.

use super::stats::SummaryStats;
use crate::datagen::{augment_pair, AugmentorConfig, LabeledDataset, ViewSeed};
use crate::diffcore::EncoderNet;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::scalar::Scalar;

/// Epoch coordinate reserved for audit views, so they never replay a
/// training epoch's augmentations.
pub const AUDIT_EPOCH: u64 = u64::MAX;

/// One `(x, y)` view pair per requested id, stacked as two matrices.
pub fn paired_unlearn_views<T: Scalar>(
    data: &LabeledDataset<T>,
    ids: &[u64],
    cfg: &AugmentorConfig,
    seed: u64,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let rows = data.rows_of(ids)?;
    let dim = data.dim();
    let mut xs = Vec::with_capacity(rows.len() * dim);
    let mut ys = Vec::with_capacity(rows.len() * dim);
    for (&r, &id) in rows.iter().zip(ids) {
        let at = ViewSeed {
            seed,
            id,
            epoch: AUDIT_EPOCH,
        };
        let (x, y) = augment_pair(data.sample(r), cfg, at);
        xs.extend(x);
        ys.extend(y);
    }
    Ok((
        Matrix::from_vec(rows.len(), dim, xs)?,
        Matrix::from_vec(rows.len(), dim, ys)?,
    ))
}

/// Cosine similarity clamped to `[-1, 1]`; zero vectors are a domain error.
pub(crate) fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    let denom = norm(a) * norm(b);
    if denom == T::zero() {
        return Err(Error::Domain("cosine of a zero vector".into()));
    }
    Ok((dot(a, b) / denom).max(-T::one()).min(T::one()))
}

/// Pairwise cosine similarity between view-x and view-y features.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentMatrix<T> {
    pub values: Matrix<T>,
    pub row_ids: Vec<u64>,
    pub col_ids: Vec<u64>,
}

impl<T: Scalar> AlignmentMatrix<T> {
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.values.rows().min(self.values.cols()))
            .map(|i| self.values[(i, i)])
            .collect()
    }
}

/// `AM[i][j] = cos(x_i, y_j)`, with rows and columns labeled by position.
pub fn alignment_matrix<T: Scalar>(
    feats_x: &Matrix<T>,
    feats_y: &Matrix<T>,
) -> Result<AlignmentMatrix<T>> {
    let ids: Vec<u64> = (0..feats_x.rows() as u64).collect();
    alignment_matrix_with_ids(&ids, feats_x, feats_y)
}

/// As [`alignment_matrix`], labeling row and column `i` with `ids[i]`.
pub fn alignment_matrix_with_ids<T: Scalar>(
    ids: &[u64],
    feats_x: &Matrix<T>,
    feats_y: &Matrix<T>,
) -> Result<AlignmentMatrix<T>> {
    if feats_x.shape() != feats_y.shape() || ids.len() != feats_x.rows() {
        return Err(Error::InvalidInput(format!(
            "alignment inputs disagree: x {:?}, y {:?}, {} ids",
            feats_x.shape(),
            feats_y.shape(),
            ids.len()
        )));
    }
    let n = feats_x.rows();
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            values[(i, j)] = cosine(feats_x.row(i), feats_y.row(j))?;
        }
    }
    Ok(AlignmentMatrix {
        values,
        row_ids: ids.to_vec(),
        col_ids: ids.to_vec(),
    })
}

/// `AM_before − AM_after`, labeled with the two models it compares.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentGapMatrix<T> {
    pub values: Matrix<T>,
    pub row_ids: Vec<u64>,
    pub col_ids: Vec<u64>,
    /// Names of the (before, after) models.
    pub provenance: (String, String),
}

impl<T: Scalar> AlignmentGapMatrix<T> {
    /// Per-sample forgetting scores.
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.values.rows().min(self.values.cols()))
            .map(|i| self.values[(i, i)])
            .collect()
    }

    pub fn off_diagonal_mean(&self) -> T {
        let n = self.values.rows();
        if n < 2 {
            return T::zero();
        }
        let mut sum = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += self.values[(i, j)];
                }
            }
        }
        sum / T::from_count(n * (n - 1))
    }
}

pub fn alignment_gap<T: Scalar>(
    before: &AlignmentMatrix<T>,
    after: &AlignmentMatrix<T>,
    provenance: (&str, &str),
) -> Result<AlignmentGapMatrix<T>> {
    if before.row_ids != after.row_ids || before.col_ids != after.col_ids {
        return Err(Error::InvalidInput(
            "alignment matrices are labeled with different ids".into(),
        ));
    }
    if before.values.shape() != after.values.shape() {
        return Err(Error::InvalidInput("alignment matrix shapes differ".into()));
    }
    let data = before
        .values
        .as_slice()
        .iter()
        .zip(after.values.as_slice())
        .map(|(&b, &a)| b - a)
        .collect();
    let (r, c) = before.values.shape();
    Ok(AlignmentGapMatrix {
        values: Matrix::from_vec(r, c, data)?,
        row_ids: before.row_ids.clone(),
        col_ids: before.col_ids.clone(),
        provenance: (provenance.0.to_string(), provenance.1.to_string()),
    })
}

/// Per-sample drop of positive-pair alignment from features `(x, y)` under
/// the original model to features under the unlearned one.
pub fn forgetting_from_features<T: Scalar>(
    before: (&Matrix<T>, &Matrix<T>),
    after: (&Matrix<T>, &Matrix<T>),
) -> Result<(T, Vec<T>)> {
    let n = before.0.rows();
    if [before.1.rows(), after.0.rows(), after.1.rows()] != [n; 3] || n == 0 {
        return Err(Error::InvalidInput(
            "forgetting score needs the same nonzero number of samples in every view".into(),
        ));
    }
    let per_sample = (0..n)
        .map(|i| {
            Ok(cosine(before.0.row(i), before.1.row(i))? - cosine(after.0.row(i), after.1.row(i))?)
        })
        .collect::<Result<Vec<T>>>()?;
    let fs = per_sample.iter().copied().sum::<T>() / T::from_count(n);
    Ok((fs, per_sample))
}

/// Forgetting score of `g_hat` relative to `g` on the unlearn ids, using the
/// same replayed view pairs for both encoders.
pub fn forgetting_score<T: Scalar>(
    g: &EncoderNet<T>,
    g_hat: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    unlearn_ids: &[u64],
    cfg: &AugmentorConfig,
    seed: u64,
) -> Result<(T, Vec<T>)> {
    let (vx, vy) = paired_unlearn_views(data, unlearn_ids, cfg, seed)?;
    forgetting_from_features(
        (&g.forward(&vx)?, &g.forward(&vy)?),
        (&g_hat.forward(&vx)?, &g_hat.forward(&vy)?),
    )
}

/// Alignment matrices of both encoders and their gap on shared views.
pub fn alignment_audit<T: Scalar>(
    g: &EncoderNet<T>,
    g_hat: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    unlearn_ids: &[u64],
    cfg: &AugmentorConfig,
    seed: u64,
) -> Result<(AlignmentMatrix<T>, AlignmentMatrix<T>, AlignmentGapMatrix<T>)> {
    let (vx, vy) = paired_unlearn_views(data, unlearn_ids, cfg, seed)?;
    let before = alignment_matrix_with_ids(unlearn_ids, &g.forward(&vx)?, &g.forward(&vy)?)?;
    let after = alignment_matrix_with_ids(unlearn_ids, &g_hat.forward(&vx)?, &g_hat.forward(&vy)?)?;
    let gap = alignment_gap(&before, &after, ("before", "after"))?;
    Ok((before, after, gap))
}

/// Which off-diagonal entries enter [`neg_alignment_stats`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegAlignMode {
    /// All `n(n−1)` off-diagonal entries.
    Full,
    /// The `n(n−1)/2` entries above the diagonal, as a data owner counts them.
    UpperTriangle,
}

pub fn neg_alignment_values<T: Scalar>(agm: &AlignmentGapMatrix<T>, mode: NegAlignMode) -> Vec<f64> {
    let n = agm.values.rows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let keep = match mode {
                NegAlignMode::Full => i != j,
                NegAlignMode::UpperTriangle => j > i,
            };
            if keep {
                out.push(agm.values[(i, j)].as_f64());
            }
        }
    }
    out
}

pub fn neg_alignment_stats<T: Scalar>(
    agm: &AlignmentGapMatrix<T>,
    mode: NegAlignMode,
) -> Result<SummaryStats> {
    if agm.values.rows() < 2 || agm.values.rows() != agm.values.cols() {
        return Err(Error::InvalidInput(format!(
            "negative alignment needs a square gap matrix with n >= 2, got {:?}",
            agm.values.shape()
        )));
    }
    SummaryStats::from_samples(&neg_alignment_values(agm, mode))
}

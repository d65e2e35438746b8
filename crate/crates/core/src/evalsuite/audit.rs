//! Data-owner audit from feature outputs alone.
//!
//! An auditor holds only their own samples and the encoders' outputs on two
//! views of each. Audit dumps store, per id, the view-x features followed by
//! the view-y features in one row.

use super::alignment::{
    alignment_gap, alignment_matrix_with_ids, forgetting_from_features, neg_alignment_stats,
    paired_unlearn_views, AlignmentGapMatrix, AlignmentMatrix, NegAlignMode,
};
use super::stats::{welch_ttest, SummaryStats, TTestResult};
use crate::datagen::{AugmentorConfig, LabeledDataset};
use crate::diffcore::EncoderNet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Features of both views of the audited samples under one encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditFeatures {
    pub ids: Vec<u64>,
    pub x: Matrix<f64>,
    pub y: Matrix<f64>,
}

impl AuditFeatures {
    pub fn new(ids: Vec<u64>, x: Matrix<f64>, y: Matrix<f64>) -> Result<Self> {
        if x.shape() != y.shape() || ids.len() != x.rows() {
            return Err(Error::InvalidInput(format!(
                "audit views disagree: {} ids, x {:?}, y {:?}",
                ids.len(),
                x.shape(),
                y.shape()
            )));
        }
        Ok(Self { ids, x, y })
    }

    /// Encodes the replayed view pairs of `ids`.
    pub fn from_encoder<T: Scalar>(
        enc: &EncoderNet<T>,
        data: &LabeledDataset<T>,
        ids: &[u64],
        cfg: &AugmentorConfig,
        seed: u64,
    ) -> Result<Self> {
        let (vx, vy) = paired_unlearn_views(data, ids, cfg, seed)?;
        Self::new(
            ids.to_vec(),
            enc.forward(&vx)?.cast(),
            enc.forward(&vy)?.cast(),
        )
    }

    /// Splits a dump matrix whose rows are `[x | y]`.
    pub fn from_dump(ids: Vec<u64>, joined: &Matrix<f64>) -> Result<Self> {
        if joined.cols() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "audit dump needs an even number of columns, got {}",
                joined.cols()
            )));
        }
        let d = joined.cols() / 2;
        let n = joined.rows();
        let mut x = Vec::with_capacity(n * d);
        let mut y = Vec::with_capacity(n * d);
        for row in joined.iter_rows() {
            x.extend_from_slice(&row[..d]);
            y.extend_from_slice(&row[d..]);
        }
        Self::new(ids, Matrix::from_vec(n, d, x)?, Matrix::from_vec(n, d, y)?)
    }

    /// Rows `[x | y]`, the inverse of [`AuditFeatures::from_dump`].
    pub fn joined(&self) -> Matrix<f64> {
        let (n, d) = self.x.shape();
        let mut out = Vec::with_capacity(n * 2 * d);
        for (a, b) in self.x.iter_rows().zip(self.y.iter_rows()) {
            out.extend_from_slice(a);
            out.extend_from_slice(b);
        }
        Matrix::from_vec(n, 2 * d, out).expect("sized above")
    }

    pub fn alignment(&self) -> Result<AlignmentMatrix<f64>> {
        alignment_matrix_with_ids(&self.ids, &self.x, &self.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub fs: f64,
    pub per_sample: Vec<f64>,
    pub am_before: AlignmentMatrix<f64>,
    pub am_after: AlignmentMatrix<f64>,
    pub agm: AlignmentGapMatrix<f64>,
    /// Upper-triangle statistics of the gap's off-diagonal entries.
    pub neg_align: SummaryStats,
    /// Per-sample forgetting scores against the null model's.
    pub fs_test: TTestResult,
    /// Negative-alignment gaps against the null model's.
    pub neg_test: TTestResult,
}

impl AuditReport {
    pub fn to_kv(&self) -> String {
        format!(
            "fs={}\nsamples={}\nneg_align_mean={}\nneg_align_std={}\nneg_align_n={}\n\
             fs_t={}\nfs_df={}\nfs_p={}\nneg_t={}\nneg_df={}\nneg_p={}\n",
            self.fs,
            self.per_sample.len(),
            self.neg_align.mean,
            self.neg_align.std,
            self.neg_align.n,
            self.fs_test.t_statistic,
            self.fs_test.degrees_of_freedom,
            self.fs_test.p_value,
            self.neg_test.t_statistic,
            self.neg_test.degrees_of_freedom,
            self.neg_test.p_value,
        )
    }
}

fn zero_null(like: &SummaryStats) -> SummaryStats {
    SummaryStats {
        mean: 0.0,
        std: 0.0,
        n: like.n,
    }
}

/// Compares the original and the unlearned encoder on the auditor's samples.
///
/// The hypothesis tests contrast the observed gaps with those of `null`, a
/// model that did not unlearn. Without a null model the gaps are tested
/// against an all-zero gap of the same size.
pub fn owner_audit(
    before: &AuditFeatures,
    after: &AuditFeatures,
    null: Option<&AuditFeatures>,
) -> Result<AuditReport> {
    if before.ids != after.ids {
        return Err(Error::InvalidInput("before and after dumps list different ids".into()));
    }
    let (fs, per_sample) =
        forgetting_from_features((&before.x, &before.y), (&after.x, &after.y))?;
    let am_before = before.alignment()?;
    let am_after = after.alignment()?;
    let agm = alignment_gap(&am_before, &am_after, ("before", "after"))?;
    let neg_align = neg_alignment_stats(&agm, NegAlignMode::UpperTriangle)?;
    let fs_stats = SummaryStats::from_samples(&per_sample)?;

    let (fs_null, neg_null) = match null {
        Some(n) => {
            if n.ids != before.ids {
                return Err(Error::InvalidInput("null dump lists different ids".into()));
            }
            let (_, null_per) = forgetting_from_features((&before.x, &before.y), (&n.x, &n.y))?;
            let null_agm = alignment_gap(&am_before, &n.alignment()?, ("before", "null"))?;
            (
                SummaryStats::from_samples(&null_per)?,
                neg_alignment_stats(&null_agm, NegAlignMode::UpperTriangle)?,
            )
        }
        None => (zero_null(&fs_stats), zero_null(&neg_align)),
    };
    Ok(AuditReport {
        fs,
        fs_test: welch_ttest(fs_stats, fs_null)?,
        neg_test: welch_ttest(neg_align, neg_null)?,
        per_sample,
        am_before,
        am_after,
        agm,
        neg_align,
    })
}

//! White-box and black-box evaluation of unlearned encoders.
//!
//! Encoder-level: forgetting score, alignment (gap) matrices, negative
//! alignment statistics and the alignment membership attack. Downstream:
//! linear probing, retain/test/unlearn accuracies and the confidence attack.

mod alignment;
mod audit;
mod mia;
mod probe;
mod report;
mod stats;
mod uniformity;

pub use alignment::{
    alignment_audit, alignment_gap, alignment_matrix, alignment_matrix_with_ids,
    forgetting_from_features, forgetting_score, neg_alignment_stats, neg_alignment_values,
    paired_unlearn_views, AlignmentGapMatrix, AlignmentMatrix, NegAlignMode, AUDIT_EPOCH,
};
pub use audit::{owner_audit, AuditFeatures, AuditReport};
pub use mia::{
    balanced_members, cmia_efficacy, encoder_mi_efficacy, encoder_mi_scores, learn_threshold,
    threshold_efficacy, true_negative_rate, MiaConfig,
};
pub use probe::{
    accuracy, classifier_metrics, features_of, linear_probe, train_head, Accuracies, LinearHead,
    ProbeConfig, SoftmaxCrossEntropy,
};
pub use report::{evaluate, gap_report, EvalConfig, EvalReport, GapReport, METRICS};
pub use stats::{
    ln_gamma, reg_incomplete_beta, student_t_two_tailed, welch_ttest, SummaryStats, TTestResult,
};
pub use uniformity::{uniformity_angles, Uniformity, ANGLE_BINS};

//! Threshold membership-inference attacks: the alignment-based encoder attack
//! and the confidence-based classifier attack.
//!
//! Both learn a single threshold separating members (retain samples) from
//! non-members (test samples) and report the fraction of unlearn samples the
//! threshold calls non-members.

use rand::seq::SliceRandom;

use super::alignment::{cosine, AUDIT_EPOCH};
use super::probe::{features_of, LinearHead};
use crate::datagen::{augment_views, AugmentorConfig, LabeledDataset, Splits, ViewSeed};
use crate::diffcore::EncoderNet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::seed::{self, Stream};

/// Accuracy-maximizing threshold: a score strictly above it is a member.
///
/// Candidates are `-inf`, the midpoints between consecutive distinct scores,
/// and `+inf`. Among equally accurate candidates the lowest wins.
pub fn learn_threshold(members: &[f64], non_members: &[f64]) -> Result<f64> {
    if members.is_empty() || non_members.is_empty() {
        return Err(Error::InvalidInput(
            "threshold attack needs members and non-members".into(),
        ));
    }
    if members.iter().chain(non_members).any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN membership score".into()));
    }
    let mut all: Vec<(f64, bool)> = members
        .iter()
        .map(|&s| (s, true))
        .chain(non_members.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // at -inf every sample is called a member
    let mut correct = members.len() as i64;
    let mut best = (correct, f64::NEG_INFINITY);
    let mut i = 0;
    while i < all.len() {
        let v = all[i].0;
        while i < all.len() && all[i].0 == v {
            correct += if all[i].1 { -1 } else { 1 };
            i += 1;
        }
        let t = match all.get(i) {
            Some(&(next, _)) => midpoint(v, next),
            None => f64::INFINITY,
        };
        if correct > best.0 {
            best = (correct, t);
        }
    }
    Ok(best.1)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Fraction of `scores` the threshold classifies as non-members.
pub fn true_negative_rate(scores: &[f64], threshold: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("no unlearn scores".into()));
    }
    Ok(scores.iter().filter(|&&s| s <= threshold).count() as f64 / scores.len() as f64)
}

/// Learns the threshold on members versus non-members and applies it to
/// the unlearn scores.
pub fn threshold_efficacy(members: &[f64], non_members: &[f64], unlearn: &[f64]) -> Result<f64> {
    true_negative_rate(unlearn, learn_threshold(members, non_members)?)
}

/// Equal-sized member and non-member id sets: the larger of retain and test
/// is subsampled without replacement to the size of the smaller one.
pub fn balanced_members(splits: &Splits, seed: u64) -> Result<(Vec<u64>, Vec<u64>)> {
    let m = splits.retain.len().min(splits.test.len());
    if m == 0 || splits.unlearn.is_empty() {
        return Err(Error::InvalidInput(
            "membership inference needs non-empty retain, test and unlearn sets".into(),
        ));
    }
    let pick = |ids: &[u64], tag: u64| {
        let mut v = ids.to_vec();
        if v.len() > m {
            v.shuffle(&mut seed::rng(seed, Stream::MemberSample, &[tag]));
            v.truncate(m);
            v.sort_unstable();
        }
        v
    };
    Ok((pick(&splits.retain, 0), pick(&splits.test, 1)))
}

/// Mean cosine similarity over every pair of `n_aug` augmented views, one
/// score per id. `n_aug = 10` gives 45 pairs.
pub fn encoder_mi_scores<T: Scalar>(
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    ids: &[u64],
    n_aug: usize,
    cfg: &AugmentorConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_aug < 2 {
        return Err(Error::Config("alignment attack needs at least 2 views".into()));
    }
    let rows = data.rows_of(ids)?;
    let pairs = n_aug * (n_aug - 1) / 2;
    rows.iter()
        .zip(ids)
        .map(|(&r, &id)| {
            let at = ViewSeed {
                seed,
                id,
                epoch: AUDIT_EPOCH - 1,
            };
            let views = augment_views(data.sample(r), cfg, at, n_aug);
            let feats = enc.forward(&Matrix::from_rows(&views)?)?;
            let mut sum = 0.0;
            for a in 0..n_aug {
                for b in a + 1..n_aug {
                    sum += cosine(feats.row(a), feats.row(b))?.as_f64();
                }
            }
            Ok(sum / pairs as f64)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiaConfig {
    pub n_aug: usize,
    pub augment: AugmentorConfig,
    pub seed: u64,
}

impl Default for MiaConfig {
    fn default() -> Self {
        Self {
            n_aug: 10,
            augment: AugmentorConfig::default(),
            seed: 0,
        }
    }
}

/// Alignment-based encoder attack efficacy in `[0, 1]`.
pub fn encoder_mi_efficacy<T: Scalar>(
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    splits: &Splits,
    cfg: &MiaConfig,
) -> Result<f64> {
    let (members, non_members) = balanced_members(splits, cfg.seed)?;
    let score = |ids: &[u64]| encoder_mi_scores(enc, data, ids, cfg.n_aug, &cfg.augment, cfg.seed);
    threshold_efficacy(&score(&members)?, &score(&non_members)?, &score(&splits.unlearn)?)
}

/// Confidence-based classifier attack efficacy in `[0, 1]`.
pub fn cmia_efficacy<T: Scalar>(
    head: &LinearHead<T>,
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    splits: &Splits,
    seed: u64,
) -> Result<f64> {
    let (members, non_members) = balanced_members(splits, seed)?;
    let conf = |ids: &[u64]| -> Result<Vec<f64>> {
        let (feats, _) = features_of(enc, data, ids)?;
        Ok(head.confidences(&feats)?.into_iter().map(Scalar::as_f64).collect())
    };
    threshold_efficacy(&conf(&members)?, &conf(&non_members)?, &conf(&splits.unlearn)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accuracy(members: &[f64], non: &[f64], t: f64) -> usize {
        members.iter().filter(|&&s| s > t).count() + non.iter().filter(|&&s| s <= t).count()
    }

    #[test]
    fn separable_scores() {
        let t = learn_threshold(&[0.9, 0.8, 0.95], &[0.1, 0.2, 0.3]).unwrap();
        assert!(t > 0.3 && t < 0.8);
        assert_eq!(threshold_efficacy(&[0.9, 0.8], &[0.1, 0.2], &[0.05, 0.15]).unwrap(), 1.0);
    }

    #[test]
    fn equal_scores_take_lowest_threshold() {
        let t = learn_threshold(&[0.5; 4], &[0.5; 4]).unwrap();
        assert_eq!(t, f64::NEG_INFINITY);
        assert_eq!(threshold_efficacy(&[0.5; 4], &[0.5; 4], &[0.5; 3]).unwrap(), 0.0);
    }

    #[test]
    fn fixed_eight_point_set() {
        let m = [0.9, 0.7, 0.4, 0.85];
        let n = [0.2, 0.6, 0.75, 0.3];
        let t = learn_threshold(&m, &n).unwrap();
        // 6 of 8 is the best any cut achieves; the lowest such cut is 0.3 | 0.4
        assert_eq!(accuracy(&m, &n, t), 6);
        assert!((t - 0.35).abs() < 1e-12, "{t}");
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(learn_threshold(&[], &[0.1]).is_err());
        assert!(true_negative_rate(&[], 0.0).is_err());
    }
}

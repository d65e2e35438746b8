//! Linear probing on frozen features and the resulting accuracies.

use rand::seq::SliceRandom;

use crate::datagen::{LabeledDataset, Splits};
use crate::diffcore::{backprop, sgd_momentum_step, DenseLayer, EncoderNet, FeatureLoss, OptState};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::seed::{self, Stream};

/// Softmax-regression head over encoder features.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHead<T> {
    net: EncoderNet<T>,
}

impl<T: Scalar> LinearHead<T> {
    /// All-zero head: every class gets probability `1 / classes`.
    pub fn zeros(feature_dim: usize, num_classes: usize) -> Self {
        let layer = DenseLayer::zeros(feature_dim, num_classes);
        Self {
            net: EncoderNet::new(vec![layer], false).expect("single layer is consistent"),
        }
    }

    pub fn from_layer(layer: DenseLayer<T>) -> Result<Self> {
        Ok(Self {
            net: EncoderNet::new(vec![layer], false)?,
        })
    }

    /// Wraps a single-layer, unnormalized network, e.g. one read back from
    /// a checkpoint.
    pub fn from_net(net: EncoderNet<T>) -> Result<Self> {
        if net.layers().len() != 1 || net.normalize_output() {
            return Err(Error::InvalidInput(
                "a linear head is one unnormalized dense layer".into(),
            ));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &EncoderNet<T> {
        &self.net
    }

    pub fn layer(&self) -> &DenseLayer<T> {
        &self.net.layers()[0]
    }

    pub fn feature_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.net.output_dim()
    }

    pub fn logits(&self, features: &Matrix<T>) -> Result<Matrix<T>> {
        self.net.forward(features)
    }

    /// Arg-max class per row; the lowest index wins ties.
    pub fn predict(&self, features: &Matrix<T>) -> Result<Vec<usize>> {
        Ok(self.logits(features)?.iter_rows().map(argmax).collect())
    }

    /// Softmax probability of the predicted class per row.
    pub fn confidences(&self, features: &Matrix<T>) -> Result<Vec<T>> {
        Ok(self
            .logits(features)?
            .iter_rows()
            .map(|row| {
                let p = softmax(row);
                p[argmax(row)]
            })
            .collect())
    }
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn softmax<T: Scalar>(row: &[T]) -> Vec<T> {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = row.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy of softmax logits against integer labels.
#[derive(Clone, Debug)]
pub struct SoftmaxCrossEntropy<'a> {
    pub labels: &'a [usize],
}

impl<T: Scalar> FeatureLoss<T> for SoftmaxCrossEntropy<'_> {
    fn value_and_grad(&self, logits: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        if logits.rows() != self.labels.len() || logits.rows() == 0 {
            return Err(Error::InvalidInput(format!(
                "{} logit rows for {} labels",
                logits.rows(),
                self.labels.len()
            )));
        }
        let n = T::from_count(logits.rows());
        let mut grad = Matrix::zeros(logits.rows(), logits.cols());
        let mut loss = T::zero();
        for (i, (row, &y)) in logits.iter_rows().zip(self.labels).enumerate() {
            if y >= row.len() {
                return Err(Error::InvalidInput(format!(
                    "label {y} out of range for {} classes",
                    row.len()
                )));
            }
            let p = softmax(row);
            loss -= p[y].max(T::min_positive_value()).ln();
            let g = grad.row_mut(i);
            for (gk, &pk) in g.iter_mut().zip(&p) {
                *gk = pk / n;
            }
            g[y] -= T::one() / n;
        }
        Ok((loss / n, grad))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1.0,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 256,
            seed: 0,
        }
    }
}

/// Clean (unaugmented) encoder features of the given ids.
pub fn features_of<T: Scalar>(
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    ids: &[u64],
) -> Result<(Matrix<T>, Vec<usize>)> {
    let rows = data.rows_of(ids)?;
    let feats = enc.forward(&data.samples().select_rows(&rows))?;
    let labels = rows.iter().map(|&r| data.labels()[r]).collect();
    Ok((feats, labels))
}

/// Trains a softmax head on frozen features of `ids` with SGD and a cosine
/// schedule, starting from zero weights.
pub fn linear_probe<T: Scalar>(
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    ids: &[u64],
    cfg: &ProbeConfig,
) -> Result<LinearHead<T>> {
    let (feats, labels) = features_of(enc, data, ids)?;
    train_head(&feats, &labels, data.num_classes(), cfg)
}

/// Trains a head directly on a feature matrix.
pub fn train_head<T: Scalar>(
    feats: &Matrix<T>,
    labels: &[usize],
    num_classes: usize,
    cfg: &ProbeConfig,
) -> Result<LinearHead<T>> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("probe batch size must be positive".into()));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Config(format!(
            "linear probe needs at least two classes, found {}",
            distinct.len()
        )));
    }
    let mut head = LinearHead::zeros(feats.cols(), num_classes);
    if cfg.epochs == 0 {
        return Ok(head);
    }
    let n = feats.rows();
    let batch = cfg.batch_size.min(n);
    let steps = n.div_ceil(batch);
    let mut opt = OptState::new(
        &head.net,
        cfg.epochs * steps,
        T::lit(cfg.lr),
        T::lit(cfg.momentum),
        T::lit(cfg.weight_decay),
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng(cfg.seed, Stream::Shuffle, &[u64::MAX, epoch as u64]));
        for chunk in order.chunks(batch) {
            let x = feats.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, grads) = backprop(&head.net, &x, &SoftmaxCrossEntropy { labels: &y })?;
            sgd_momentum_step(&mut head.net, &grads, &mut opt)?;
        }
    }
    Ok(head)
}

/// Top-1 accuracy, in percent, of `head` on clean features of `ids`.
pub fn accuracy<T: Scalar>(
    head: &LinearHead<T>,
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    ids: &[u64],
) -> Result<f64> {
    if ids.is_empty() {
        return Err(Error::InvalidInput("accuracy over an empty split".into()));
    }
    let (feats, labels) = features_of(enc, data, ids)?;
    let hits = head
        .predict(&feats)?
        .iter()
        .zip(&labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok(100.0 * hits as f64 / ids.len() as f64)
}

/// Retain, test and unlearn accuracies in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracies {
    pub ra: f64,
    pub ta: f64,
    pub ua: f64,
}

pub fn classifier_metrics<T: Scalar>(
    head: &LinearHead<T>,
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    splits: &Splits,
) -> Result<Accuracies> {
    Ok(Accuracies {
        ra: accuracy(head, enc, data, &splits.retain)?,
        ta: accuracy(head, enc, data, &splits.test)?,
        ua: accuracy(head, enc, data, &splits.unlearn)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::finite_diff_check;
    use crate::seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_head_is_uniform() {
        let h = LinearHead::<f64>::zeros(3, 4);
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_abs_diff_eq!(h.confidences(&x).unwrap()[0], 0.25, epsilon = 1e-15);
        assert_eq!(h.predict(&x).unwrap(), vec![0]);
    }

    #[test]
    fn cross_entropy_hand_value() {
        let logits = Matrix::from_rows(&[vec![0.0, (2.0f64).ln()]]).unwrap();
        let (v, g) = SoftmaxCrossEntropy { labels: &[1] }.value_and_grad(&logits).unwrap();
        assert_abs_diff_eq!(v, -(2.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(g[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(0, 1)], -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        for s in 0..4u64 {
            let head = EncoderNet::<f64>::init(&[5, 3], false, s).unwrap();
            let x = crate::diffcore::gaussian_matrix(6, 5, &mut seed::rng(s, Stream::Synthetic, &[]));
            let labels = [0, 1, 2, 1, 0, 2];
            let err = finite_diff_check(&head, &x, &SoftmaxCrossEntropy { labels: &labels }, 1e-6)
                .unwrap();
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn separable_features_fit_exactly() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| match i % 3 {
                0 => vec![1.0, 0.0],
                1 => vec![-0.5, 0.8],
                _ => vec![-0.5, -0.8],
            })
            .collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = ProbeConfig {
            epochs: 30,
            batch_size: 8,
            ..Default::default()
        };
        let head = train_head(&x, &labels, 3, &cfg).unwrap();
        assert_eq!(head.predict(&x).unwrap(), labels);
        assert_eq!(train_head(&x, &labels, 3, &cfg).unwrap(), head);
    }

    #[test]
    fn single_class_rejected_and_zero_epochs_uniform() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            train_head(&x, &[0, 0], 2, &ProbeConfig::default()),
            Err(Error::Config(_))
        ));
        let cfg = ProbeConfig {
            epochs: 0,
            ..Default::default()
        };
        assert_eq!(
            train_head(&x, &[0, 1], 2, &cfg).unwrap(),
            LinearHead::<f64>::zeros(1, 2)
        );
    }

    #[test]
    fn hand_counted_toy_accuracies() {
        // identity encoder on 2D inputs; head predicts class 1 iff x0 < x1
        let enc = EncoderNet::new(
            vec![DenseLayer::new(Matrix::identity(2), vec![0.0; 2]).unwrap()],
            false,
        )
        .unwrap();
        let head = LinearHead::from_layer(
            DenseLayer::new(Matrix::identity(2), vec![0.0; 2]).unwrap(),
        )
        .unwrap();
        let data = LabeledDataset::new(
            Matrix::from_rows(&[
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![0.2, 0.9],
            ])
            .unwrap(),
            vec![0, 1, 0, 1, 1],
            vec![0, 1, 2, 3, 4],
            2,
        )
        .unwrap();
        let splits = Splits {
            retain: vec![0, 1, 2],
            unlearn: vec![3],
            test: vec![4],
            ..Default::default()
        };
        let acc = classifier_metrics(&head, &enc, &data, &splits).unwrap();
        assert_abs_diff_eq!(acc.ra, 200.0 / 3.0, epsilon = 1e-12);
        assert_eq!((acc.ta, acc.ua), (100.0, 0.0));
        let empty = Splits {
            test: vec![],
            ..splits
        };
        assert!(classifier_metrics(&head, &enc, &data, &empty).is_err());
    }
}

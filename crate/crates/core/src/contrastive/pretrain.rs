use rand::seq::SliceRandom;

use super::{InfoNce, DEFAULT_TEMPERATURE};
use crate::datagen::{paired_batch, AugmentorConfig, LabeledDataset, Splits};
use crate::diffcore::{backprop, sgd_momentum_step, EncoderNet, OptState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{self, Stream};

/// Widths of a dense encoder: input, hidden layers, output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl Architecture {
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.input_dim);
        d.extend(&self.hidden);
        d.push(self.output_dim);
        d
    }

    /// Fresh normalized encoder with weights drawn from `seed`.
    pub fn build<T: Scalar>(&self, seed: u64) -> Result<EncoderNet<T>> {
        EncoderNet::init(&self.dims(), true, seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub augment: AugmentorConfig,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            batch_size: 64,
            epochs: 200,
            base_lr: 0.06,
            momentum: 0.9,
            weight_decay: 5e-4,
            seed: 0,
            augment: AugmentorConfig::default(),
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        self.augment.validate()
    }
}

/// Trains a fresh encoder on the train split.
pub fn pretrain<T: Scalar>(
    data: &LabeledDataset<T>,
    splits: &Splits,
    cfg: &ContrastiveConfig,
    arch: &Architecture,
) -> Result<EncoderNet<T>> {
    train_on_ids(data, &splits.train, cfg, arch)
}

/// Minimizes batch InfoNCE over `ids` from a seeded initialization.
///
/// Each epoch reshuffles the ids and walks them in full batches (a trailing
/// partial batch is dropped); views are seeded by `(seed, id, epoch)`.
pub fn train_on_ids<T: Scalar>(
    data: &LabeledDataset<T>,
    ids: &[u64],
    cfg: &ContrastiveConfig,
    arch: &Architecture,
) -> Result<EncoderNet<T>> {
    cfg.validate()?;
    if arch.input_dim != data.dim() {
        return Err(Error::InvalidInput(format!(
            "architecture expects {} inputs, data has {}",
            arch.input_dim,
            data.dim()
        )));
    }
    let mut net = arch.build(cfg.seed)?;
    if cfg.epochs == 0 {
        return Ok(net);
    }
    if ids.len() < 2 {
        return Err(Error::Config(format!(
            "contrastive training needs at least 2 samples, got {}",
            ids.len()
        )));
    }
    if cfg.augment.is_identity() {
        log::warn!("identity augmentation: positive views coincide");
    }
    let rows = data.rows_of(ids)?;
    let batch = cfg.batch_size.min(rows.len());
    let steps_per_epoch = rows.len() / batch;
    let mut opt = OptState::new(
        &net,
        cfg.epochs * steps_per_epoch,
        T::lit(cfg.base_lr),
        T::lit(cfg.momentum),
        T::lit(cfg.weight_decay),
    )?;
    let loss = InfoNce::new(T::lit(cfg.temperature));
    for epoch in 0..cfg.epochs {
        let mut order = rows.clone();
        order.shuffle(&mut seed::rng(cfg.seed, Stream::Shuffle, &[epoch as u64]));
        let mut epoch_loss = T::zero();
        for step in 0..steps_per_epoch {
            let chunk = &order[step * batch..(step + 1) * batch];
            let views = paired_batch(data, chunk, &cfg.augment, cfg.seed, epoch as u64);
            let (value, grads) = backprop(&net, &views, &loss)
                .map_err(|e| diverged(e, epoch, step))?;
            sgd_momentum_step(&mut net, &grads, &mut opt).map_err(|e| diverged(e, epoch, step))?;
            epoch_loss += value;
        }
        log::debug!(
            "pretrain epoch {epoch}: mean loss {}",
            epoch_loss / T::from_count(steps_per_epoch)
        );
    }
    Ok(net)
}

pub(crate) fn diverged(err: Error, epoch: usize, step: usize) -> Error {
    match err {
        Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}, step {step}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_synthetic, split};

    fn setup() -> (LabeledDataset<f64>, Splits, Architecture) {
        let d = gen_synthetic(3, 6, 90, 5.0, 1).unwrap();
        let s = split(&d, 0.1, 0.2, 0.1, 1).unwrap();
        let arch = Architecture {
            input_dim: 6,
            hidden: vec![8],
            output_dim: 4,
        };
        (d, s, arch)
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (d, s, arch) = setup();
        let cfg = ContrastiveConfig {
            epochs: 0,
            seed: 4,
            ..Default::default()
        };
        let net = pretrain(&d, &s, &cfg, &arch).unwrap();
        assert_eq!(net, arch.build::<f64>(4).unwrap());
    }

    #[test]
    fn training_is_deterministic_and_moves_weights() {
        let (d, s, arch) = setup();
        let cfg = ContrastiveConfig {
            epochs: 3,
            batch_size: 16,
            seed: 2,
            ..Default::default()
        };
        let a = pretrain(&d, &s, &cfg, &arch).unwrap();
        let b = pretrain(&d, &s, &cfg, &arch).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, arch.build::<f64>(2).unwrap());
    }

    #[test]
    fn divergence_is_reported_with_position() {
        let (d, s, arch) = setup();
        let cfg = ContrastiveConfig {
            epochs: 2,
            base_lr: 1e300,
            batch_size: 16,
            ..Default::default()
        };
        match pretrain(&d, &s, &cfg, &arch) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("epoch"), "{msg}"),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_architecture_rejected() {
        let (d, s, mut arch) = setup();
        arch.input_dim = 7;
        assert!(pretrain(&d, &s, &ContrastiveConfig::default(), &arch).is_err());
    }
}

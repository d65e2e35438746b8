//! Unlearning procedures: retraining from scratch, four approximate
//! baselines, and alignment calibration.

mod objectives;

pub use objectives::{
    AcObjective, Calibration, NegGradObjective, RetainObjective, UnlearnObjective, ViewLayout,
};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::contrastive::{train_on_ids, Architecture, ContrastiveConfig, DEFAULT_TEMPERATURE};
use crate::datagen::{paired_batch, AugmentorConfig, LabeledDataset, Splits};
use crate::diffcore::{backprop, sgd_momentum_step, EncoderNet, FeatureLoss, GradSet, OptState};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::seed::{self, Stream};

/// Optimization settings shared by the approximate unlearners.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub retain_batch: usize,
    pub unlearn_batch: usize,
    pub temperature: f64,
    pub seed: u64,
    pub augment: AugmentorConfig,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 0.006,
            momentum: 0.9,
            weight_decay: 5e-4,
            retain_batch: 64,
            unlearn_batch: 16,
            temperature: DEFAULT_TEMPERATURE,
            seed: 0,
            augment: AugmentorConfig::default(),
        }
    }
}

impl RunSettings {
    fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if self.retain_batch < 2 {
            return Err(Error::Config("retain batch must hold at least 2 samples".into()));
        }
        if self.unlearn_batch == 0 {
            return Err(Error::Config("unlearn batch must be positive".into()));
        }
        self.augment.validate()
    }
}

/// Alignment-calibration settings. `epsilon = None` derives
/// `|unlearn| / |retain|` from the splits.
#[derive(Clone, Debug, PartialEq)]
pub struct AcConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: Option<f64>,
    pub run: RunSettings,
}

impl Default for AcConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            gamma: 1.0,
            epsilon: None,
            run: RunSettings::default(),
        }
    }
}

impl AcConfig {
    pub fn resolved_epsilon(&self, splits: &Splits) -> Result<f64> {
        match self.epsilon {
            Some(e) if e >= 0.0 && e.is_finite() => Ok(e),
            Some(e) => Err(Error::Config(format!("epsilon {e} must be non-negative"))),
            None => {
                let r = splits.epsilon()?;
                Ok(*r.numer() as f64 / *r.denom() as f64)
            }
        }
    }

    fn calibration<T: Scalar>(&self) -> Result<Calibration<T>> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be non-negative")));
            }
        }
        Ok(Calibration {
            alpha: T::lit(self.alpha),
            beta: T::lit(self.beta),
            gamma: T::lit(self.gamma),
        })
    }
}

/// An unlearning procedure with its hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub enum UnlearnMethod {
    /// Exact unlearning: train a fresh encoder on the retain split.
    Retrain(ContrastiveConfig),
    /// Keep minimizing InfoNCE on retain batches.
    FineTune(RunSettings),
    /// Ascend InfoNCE on unlearn batches.
    GradAscent(RunSettings),
    /// Minimize retain InfoNCE minus `weight` times unlearn InfoNCE.
    NegGrad { run: RunSettings, weight: f64 },
    /// Fine-tune with an added `lambda · Σ|θ|` penalty.
    L1Sparsity { run: RunSettings, lambda: f64 },
    AlignmentCalibration(AcConfig),
}

/// Method identifiers accepted by [`UnlearnMethod::from_kind`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodKind {
    Retrain,
    FineTune,
    GradAscent,
    NegGrad,
    L1Sparsity,
    Ac,
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "retrain" => Self::Retrain,
            "finetune" | "fine-tune" | "ft" => Self::FineTune,
            "gradascent" | "grad-ascent" | "ga" => Self::GradAscent,
            "neggrad" | "ng" => Self::NegGrad,
            "l1" | "l1sparsity" | "l1-sparsity" => Self::L1Sparsity,
            "ac" | "alignment-calibration" => Self::Ac,
            other => return Err(Error::Config(format!("unknown unlearning method '{other}'"))),
        })
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Retrain => "retrain",
            Self::FineTune => "finetune",
            Self::GradAscent => "gradascent",
            Self::NegGrad => "neggrad",
            Self::L1Sparsity => "l1sparsity",
            Self::Ac => "ac",
        })
    }
}

impl UnlearnMethod {
    pub fn kind(&self) -> MethodKind {
        match self {
            Self::Retrain(_) => MethodKind::Retrain,
            Self::FineTune(_) => MethodKind::FineTune,
            Self::GradAscent(_) => MethodKind::GradAscent,
            Self::NegGrad { .. } => MethodKind::NegGrad,
            Self::L1Sparsity { .. } => MethodKind::L1Sparsity,
            Self::AlignmentCalibration(_) => MethodKind::Ac,
        }
    }
}

/// Retain-only loss of a stacked batch under the current encoder.
pub fn retain_loss<T: Scalar>(
    enc: &EncoderNet<T>,
    batch: &Matrix<T>,
    layout: ViewLayout,
    temperature: T,
) -> Result<T> {
    RetainObjective {
        layout,
        temperature,
    }
    .value(&enc.forward(batch)?)
}

pub fn unlearn_loss<T: Scalar>(
    enc: &EncoderNet<T>,
    batch: &Matrix<T>,
    layout: ViewLayout,
    calibration: Calibration<T>,
    temperature: T,
) -> Result<T> {
    UnlearnObjective {
        layout,
        temperature,
        calibration,
    }
    .value(&enc.forward(batch)?)
}

pub fn ac_total_loss<T: Scalar>(
    enc: &EncoderNet<T>,
    batch: &Matrix<T>,
    layout: ViewLayout,
    calibration: Calibration<T>,
    epsilon: T,
    temperature: T,
) -> Result<T> {
    AcObjective {
        layout,
        temperature,
        calibration,
        epsilon,
    }
    .value(&enc.forward(batch)?)
}

/// Exact unlearning: a fresh encoder trained on the retain split only.
pub fn retrain<T: Scalar>(
    data: &LabeledDataset<T>,
    splits: &Splits,
    cfg: &ContrastiveConfig,
    arch: &Architecture,
) -> Result<EncoderNet<T>> {
    train_on_ids(data, &splits.retain, cfg, arch)
}

/// Alignment calibration starting from the pretrained encoder.
pub fn run_ac<T: Scalar>(
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    splits: &Splits,
    cfg: &AcConfig,
) -> Result<EncoderNet<T>> {
    let epsilon = cfg.resolved_epsilon(splits)?;
    let step = Step::Ac {
        calibration: cfg.calibration()?,
        epsilon: T::lit(epsilon),
    };
    run_loop(enc, data, splits, &cfg.run, step)
}

/// Runs any method. Retraining takes its architecture from `enc`.
pub fn run_baseline<T: Scalar>(
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    splits: &Splits,
    method: &UnlearnMethod,
) -> Result<EncoderNet<T>> {
    match method {
        UnlearnMethod::Retrain(cfg) => {
            let dims: Vec<usize> = std::iter::once(enc.input_dim())
                .chain(enc.layers().iter().map(|l| l.out_dim()))
                .collect();
            let arch = Architecture {
                input_dim: dims[0],
                hidden: dims[1..dims.len() - 1].to_vec(),
                output_dim: enc.output_dim(),
            };
            retrain(data, splits, cfg, &arch)
        }
        UnlearnMethod::FineTune(run) => run_loop(enc, data, splits, run, Step::FineTune),
        UnlearnMethod::GradAscent(run) => run_loop(enc, data, splits, run, Step::GradAscent),
        UnlearnMethod::NegGrad { run, weight } => {
            if !(*weight >= 0.0) {
                return Err(Error::Config(format!("NegGrad weight {weight} is negative")));
            }
            run_loop(
                enc,
                data,
                splits,
                run,
                Step::NegGrad {
                    weight: T::lit(*weight),
                },
            )
        }
        UnlearnMethod::L1Sparsity { run, lambda } => {
            if !(*lambda >= 0.0) {
                return Err(Error::Config(format!("l1 coefficient {lambda} is negative")));
            }
            run_loop(
                enc,
                data,
                splits,
                run,
                Step::L1 {
                    lambda: T::lit(*lambda),
                },
            )
        }
        UnlearnMethod::AlignmentCalibration(cfg) => run_ac(enc, data, splits, cfg),
    }
}

#[derive(Clone, Copy, Debug)]
enum Step<T> {
    FineTune,
    L1 { lambda: T },
    GradAscent,
    NegGrad { weight: T },
    Ac { calibration: Calibration<T>, epsilon: T },
}

impl<T: Scalar> Step<T> {
    fn uses_retain(&self) -> bool {
        !matches!(self, Step::GradAscent)
    }

    fn uses_unlearn(&self) -> bool {
        match self {
            Step::FineTune | Step::L1 { .. } => false,
            Step::GradAscent | Step::NegGrad { .. } => true,
            Step::Ac { epsilon, .. } => *epsilon != T::zero(),
        }
    }
}

/// Endless seeded walk over the unlearn rows in fixed-size batches.
struct UnlearnCursor {
    rows: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    cycle: u64,
    seed: u64,
    batch: usize,
}

impl UnlearnCursor {
    fn new(rows: Vec<usize>, seed: u64, batch: usize) -> Self {
        let batch = batch.min(rows.len());
        let mut c = Self {
            rows,
            order: Vec::new(),
            pos: 0,
            cycle: 0,
            seed,
            batch,
        };
        c.reshuffle();
        c
    }

    fn reshuffle(&mut self) {
        self.order = self.rows.clone();
        self.order
            .shuffle(&mut seed::rng(self.seed, Stream::UnlearnOrder, &[self.cycle]));
        self.pos = 0;
    }

    /// Next batch of rows plus the cycle index used to seed its views.
    fn next_batch(&mut self) -> (Vec<usize>, u64) {
        if self.pos + self.batch > self.order.len() {
            self.cycle += 1;
            self.reshuffle();
        }
        let b = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        (b, self.cycle)
    }
}

fn stack<T: Scalar>(a: Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let cols = a.cols().max(b.cols());
    let rows = a.rows() + b.rows();
    let mut data = a.into_vec();
    data.extend_from_slice(b.as_slice());
    Matrix::from_vec(rows, cols, data).expect("stacked batches share width")
}

fn run_loop<T: Scalar>(
    enc: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    splits: &Splits,
    run: &RunSettings,
    step_kind: Step<T>,
) -> Result<EncoderNet<T>> {
    run.validate()?;
    let mut net = enc.clone();
    if run.epochs == 0 {
        return Ok(net);
    }
    if enc.input_dim() != data.dim() {
        return Err(Error::InvalidInput(format!(
            "encoder expects {} inputs, data has {}",
            enc.input_dim(),
            data.dim()
        )));
    }
    let retain_rows = data.rows_of(&splits.retain)?;
    let unlearn_rows = data.rows_of(&splits.unlearn)?;
    if step_kind.uses_retain() && retain_rows.len() < 2 {
        return Err(Error::Config("retain split needs at least 2 samples".into()));
    }
    if step_kind.uses_unlearn() && unlearn_rows.is_empty() {
        return Err(Error::Config("unlearn split is empty".into()));
    }
    if matches!(step_kind, Step::GradAscent) && unlearn_rows.len() < 2 {
        return Err(Error::Config(
            "gradient ascent needs at least 2 unlearn samples".into(),
        ));
    }

    let retain_batch = run.retain_batch.min(retain_rows.len());
    let steps_per_epoch = if step_kind.uses_retain() {
        retain_rows.len() / retain_batch
    } else {
        unlearn_rows.len() / run.unlearn_batch.min(unlearn_rows.len())
    };
    let mut opt = OptState::new(
        &net,
        run.epochs * steps_per_epoch,
        T::lit(run.lr),
        T::lit(run.momentum),
        T::lit(run.weight_decay),
    )?;
    let temperature = T::lit(run.temperature);
    let mut cursor = UnlearnCursor::new(unlearn_rows.clone(), run.seed, run.unlearn_batch);

    for epoch in 0..run.epochs {
        let mut retain_order = retain_rows.clone();
        retain_order.shuffle(&mut seed::rng(run.seed, Stream::RetainOrder, &[epoch as u64]));
        for step in 0..steps_per_epoch {
            let retain_views = if step_kind.uses_retain() {
                let chunk = &retain_order[step * retain_batch..(step + 1) * retain_batch];
                paired_batch(data, chunk, &run.augment, run.seed, epoch as u64)
            } else {
                Matrix::zeros(0, data.dim())
            };
            let (unlearn_views, unlearn_pairs) = if step_kind.uses_unlearn() {
                let (rows, cycle) = cursor.next_batch();
                (
                    paired_batch(data, &rows, &run.augment, run.seed, cycle),
                    rows.len(),
                )
            } else {
                (Matrix::zeros(0, data.dim()), 0)
            };
            let layout = ViewLayout {
                retain_pairs: retain_views.rows() / 2,
                unlearn_pairs,
            };
            let batch = stack(retain_views, &unlearn_views);

            let result = match step_kind {
                Step::FineTune => backprop(
                    &net,
                    &batch,
                    &RetainObjective {
                        layout,
                        temperature,
                    },
                ),
                Step::L1 { lambda } => {
                    backprop(
                        &net,
                        &batch,
                        &RetainObjective {
                            layout,
                            temperature,
                        },
                    )
                    .map(|(v, mut g)| {
                        let penalty = add_l1(&net, &mut g, lambda);
                        (v + penalty, g)
                    })
                }
                Step::GradAscent => {
                    let objective = RetainObjective {
                        layout: ViewLayout {
                            retain_pairs: unlearn_pairs,
                            unlearn_pairs: 0,
                        },
                        temperature,
                    };
                    backprop(&net, &batch, &objective).map(|(v, mut g)| {
                        g.scale(-T::one());
                        (v, g)
                    })
                }
                Step::NegGrad { weight } => backprop(
                    &net,
                    &batch,
                    &NegGradObjective {
                        layout,
                        temperature,
                        weight,
                    },
                ),
                Step::Ac {
                    calibration,
                    epsilon,
                } => backprop(
                    &net,
                    &batch,
                    &AcObjective {
                        layout,
                        temperature,
                        calibration,
                        epsilon,
                    },
                ),
            };
            let (_, grads) = result.map_err(|e| position(e, epoch, step))?;
            sgd_momentum_step(&mut net, &grads, &mut opt).map_err(|e| position(e, epoch, step))?;
        }
    }
    Ok(net)
}

/// Adds the l1 subgradient (0 at exactly 0) and returns the penalty value.
fn add_l1<T: Scalar>(net: &EncoderNet<T>, grads: &mut GradSet<T>, lambda: T) -> T {
    if lambda == T::zero() {
        return T::zero();
    }
    let mut total = T::zero();
    for (g, &p) in grads.values_mut().zip(net.params()) {
        total += p.abs();
        if p > T::zero() {
            *g += lambda;
        } else if p < T::zero() {
            *g -= lambda;
        }
    }
    lambda * total
}

fn position(err: Error, epoch: usize, step: usize) -> Error {
    match err {
        Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}, step {step}: {msg}")),
        other => other,
    }
}

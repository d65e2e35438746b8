//! Builds core settings from a [`RunConfig`] and runs the pipeline stages.

use std::path::Path;

use muclab_core::contrastive::{pretrain, Architecture, ContrastiveConfig};
use muclab_core::datagen::{gen_synthetic, load_cifar10, split, AugmentorConfig, Splits};
use muclab_core::evalsuite::{EvalConfig, MiaConfig, ProbeConfig};
use muclab_core::persist::{read_dataset_csv, read_splits};
use muclab_core::unlearn::{
    run_ac, run_baseline, AcConfig, MethodKind, RunSettings, UnlearnMethod,
};
use muclab_core::{Dataset, Encoder, Error, Result};

use crate::config::RunConfig;

/// Dataset named by `data.source`.
pub fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    match cfg.raw("data.source") {
        "synthetic" => gen_synthetic(
            cfg.get("data.clusters")?,
            cfg.get("data.dim")?,
            cfg.get("data.samples")?,
            cfg.get("data.separation")?,
            cfg.get("seed")?,
        ),
        "csv" => read_dataset_csv(required_path(cfg, "data.path")?),
        "cifar10" => load_cifar10(
            &required_path(cfg, "data.path")?,
            cfg.get("data.max_per_batch")?,
        ),
        other => Err(Error::Config(format!("unknown data.source {other:?}"))),
    }
}

fn required_path(cfg: &RunConfig, key: &str) -> Result<std::path::PathBuf> {
    cfg.path(key)
        .ok_or_else(|| Error::Config(format!("{key} must be set")))
}

/// Splits from `split.path` if set, otherwise drawn from the seed.
pub fn load_splits(cfg: &RunConfig, data: &Dataset) -> Result<Splits> {
    if let Some(p) = cfg.path("split.path") {
        return read_splits(p);
    }
    split(
        data,
        cfg.get("split.unlearn")?,
        cfg.get("split.test")?,
        cfg.get("split.validation")?,
        cfg.get("seed")?,
    )
}

pub fn architecture(cfg: &RunConfig, data: &Dataset) -> Result<Architecture> {
    Ok(Architecture {
        input_dim: data.dim(),
        hidden: cfg.list("arch.hidden")?,
        output_dim: cfg.get("arch.output")?,
    })
}

pub fn augment(cfg: &RunConfig) -> Result<AugmentorConfig> {
    let a = AugmentorConfig {
        noise_sigma: cfg.get("augment.noise")?,
        mask_prob: cfg.get("augment.mask")?,
        scale_range: (cfg.get("augment.scale_min")?, cfg.get("augment.scale_max")?),
        image_mode: cfg.get("augment.image")?,
    };
    a.validate()?;
    Ok(a)
}

pub fn contrastive(cfg: &RunConfig) -> Result<ContrastiveConfig> {
    Ok(ContrastiveConfig {
        temperature: cfg.get("temperature")?,
        batch_size: cfg.get("pretrain.batch")?,
        epochs: cfg.get("pretrain.epochs")?,
        base_lr: cfg.get("pretrain.lr")?,
        momentum: cfg.get("pretrain.momentum")?,
        weight_decay: cfg.get("pretrain.weight_decay")?,
        seed: cfg.get("seed")?,
        augment: augment(cfg)?,
    })
}

pub fn run_settings(cfg: &RunConfig) -> Result<RunSettings> {
    Ok(RunSettings {
        epochs: cfg.get("unlearn.epochs")?,
        lr: cfg.get("unlearn.lr")?,
        momentum: cfg.get("unlearn.momentum")?,
        weight_decay: cfg.get("unlearn.weight_decay")?,
        retain_batch: cfg.get("unlearn.retain_batch")?,
        unlearn_batch: cfg.get("unlearn.unlearn_batch")?,
        temperature: cfg.get("temperature")?,
        seed: cfg.get("seed")?,
        augment: augment(cfg)?,
    })
}

pub fn ac_config(cfg: &RunConfig) -> Result<AcConfig> {
    let epsilon = match cfg.raw("unlearn.epsilon") {
        "auto" | "" => None,
        _ => Some(cfg.get("unlearn.epsilon")?),
    };
    Ok(AcConfig {
        alpha: cfg.get("unlearn.alpha")?,
        beta: cfg.get("unlearn.beta")?,
        gamma: cfg.get("unlearn.gamma")?,
        epsilon,
        run: run_settings(cfg)?,
    })
}

/// The method selected by `unlearn.method` with its hyperparameters.
pub fn method(cfg: &RunConfig) -> Result<UnlearnMethod> {
    let kind: MethodKind = cfg.raw("unlearn.method").parse()?;
    Ok(match kind {
        MethodKind::Retrain => UnlearnMethod::Retrain(contrastive(cfg)?),
        MethodKind::FineTune => UnlearnMethod::FineTune(run_settings(cfg)?),
        MethodKind::GradAscent => UnlearnMethod::GradAscent(run_settings(cfg)?),
        MethodKind::NegGrad => UnlearnMethod::NegGrad {
            run: run_settings(cfg)?,
            weight: cfg.get("unlearn.neggrad_weight")?,
        },
        MethodKind::L1Sparsity => UnlearnMethod::L1Sparsity {
            run: run_settings(cfg)?,
            lambda: cfg.get("unlearn.l1")?,
        },
        MethodKind::Ac => UnlearnMethod::AlignmentCalibration(ac_config(cfg)?),
    })
}

pub fn probe(cfg: &RunConfig) -> Result<ProbeConfig> {
    Ok(ProbeConfig {
        epochs: cfg.get("probe.epochs")?,
        lr: cfg.get("probe.lr")?,
        momentum: cfg.get("probe.momentum")?,
        weight_decay: cfg.get("probe.weight_decay")?,
        batch_size: cfg.get("probe.batch")?,
        seed: cfg.get("seed")?,
    })
}

pub fn eval(cfg: &RunConfig) -> Result<EvalConfig> {
    Ok(EvalConfig {
        probe: probe(cfg)?,
        mia: MiaConfig {
            n_aug: cfg.get("eval.n_aug")?,
            augment: augment(cfg)?,
            seed: cfg.get("seed")?,
        },
    })
}

/// Data, splits and pretrained encoder for one configuration.
pub struct Prepared {
    pub data: Dataset,
    pub splits: Splits,
    pub arch: Architecture,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let data = load_data(cfg)?;
        let splits = load_splits(cfg, &data)?;
        let arch = architecture(cfg, &data)?;
        Ok(Self { data, splits, arch })
    }

    pub fn pretrain(&self, cfg: &RunConfig) -> Result<Encoder> {
        let net = pretrain(&self.data, &self.splits, &contrastive(cfg)?, &self.arch)?;
        check_finite(&net)?;
        Ok(net)
    }

    /// Applies the configured unlearning method to `original`.
    pub fn unlearn(&self, cfg: &RunConfig, original: &Encoder) -> Result<Encoder> {
        let net = match method(cfg)? {
            UnlearnMethod::AlignmentCalibration(ac) => {
                run_ac(original, &self.data, &self.splits, &ac)?
            }
            m => run_baseline(original, &self.data, &self.splits, &m)?,
        };
        check_finite(&net)?;
        Ok(net)
    }

    pub fn retrain(&self, cfg: &RunConfig) -> Result<Encoder> {
        let net = muclab_core::unlearn::retrain(
            &self.data,
            &self.splits,
            &contrastive(cfg)?,
            &self.arch,
        )?;
        check_finite(&net)?;
        Ok(net)
    }
}

fn check_finite(net: &Encoder) -> Result<()> {
    if net.params().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(
            "training diverged: non-finite parameters".into(),
        ))
    }
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_core_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(contrastive(&cfg).unwrap(), ContrastiveConfig::default());
        assert_eq!(run_settings(&cfg).unwrap(), RunSettings::default());
        assert_eq!(ac_config(&cfg).unwrap(), AcConfig::default());
        assert_eq!(probe(&cfg).unwrap(), ProbeConfig::default());
        assert_eq!(eval(&cfg).unwrap(), EvalConfig::default());
    }

    #[test]
    fn method_selection() {
        let mut cfg = RunConfig::default();
        for (name, kind) in [
            ("ft", MethodKind::FineTune),
            ("ga", MethodKind::GradAscent),
            ("neggrad", MethodKind::NegGrad),
            ("l1", MethodKind::L1Sparsity),
            ("retrain", MethodKind::Retrain),
            ("ac", MethodKind::Ac),
        ] {
            cfg.set("unlearn.method", name).unwrap();
            assert_eq!(method(&cfg).unwrap().kind(), kind);
        }
        cfg.set("unlearn.method", "magic").unwrap();
        assert!(matches!(method(&cfg), Err(Error::Config(_))));
        cfg.set("unlearn.method", "ac").unwrap();
        cfg.set("unlearn.epsilon", "0.25").unwrap();
        assert_eq!(ac_config(&cfg).unwrap().epsilon, Some(0.25));
    }

    #[test]
    fn csv_source_requires_path() {
        let mut cfg = RunConfig::default();
        cfg.set("data.source", "csv").unwrap();
        assert!(matches!(load_data(&cfg), Err(Error::Config(_))));
    }
}

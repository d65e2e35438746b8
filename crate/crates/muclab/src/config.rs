//! Flat `key=value` run configuration.
//!
//! Every key has a default; a config file and `--set key=value` overrides
//! are layered on top. Unknown keys are rejected so that typos cannot
//! silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use muclab_core::Error;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MUCLAB_OUT";

/// Known keys with their defaults.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("out", ""),
    ("data.source", "synthetic"),
    ("data.path", ""),
    ("data.clusters", "5"),
    ("data.dim", "16"),
    ("data.samples", "2000"),
    ("data.separation", "6"),
    ("data.max_per_batch", "10000"),
    ("split.path", ""),
    ("split.unlearn", "0.1"),
    ("split.test", "0.2"),
    ("split.validation", "0.1"),
    ("arch.hidden", "32"),
    ("arch.output", "16"),
    ("augment.noise", "0.5"),
    ("augment.mask", "0.1"),
    ("augment.scale_min", "0.8"),
    ("augment.scale_max", "1.2"),
    ("augment.image", "false"),
    ("temperature", "0.5"),
    ("pretrain.epochs", "200"),
    ("pretrain.batch", "64"),
    ("pretrain.lr", "0.06"),
    ("pretrain.momentum", "0.9"),
    ("pretrain.weight_decay", "5e-4"),
    ("unlearn.method", "ac"),
    ("unlearn.epochs", "10"),
    ("unlearn.lr", "0.006"),
    ("unlearn.momentum", "0.9"),
    ("unlearn.weight_decay", "5e-4"),
    ("unlearn.retain_batch", "64"),
    ("unlearn.unlearn_batch", "16"),
    ("unlearn.alpha", "1"),
    ("unlearn.beta", "0"),
    ("unlearn.gamma", "1"),
    ("unlearn.epsilon", "auto"),
    ("unlearn.l1", "1e-4"),
    ("unlearn.neggrad_weight", "1"),
    ("probe.epochs", "100"),
    ("probe.lr", "1.0"),
    ("probe.momentum", "0.9"),
    ("probe.weight_decay", "0"),
    ("probe.batch", "256"),
    ("eval.n_aug", "10"),
    ("sweep.alpha", "1"),
    ("sweep.beta", "0,4,8"),
    ("sweep.jobs", "0"),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    /// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, Error> {
        let mut cfg = Self::default();
        let mut offset = 0u64;
        for raw in text.split_inclusive('\n') {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                    path: origin.to_path_buf(),
                    offset,
                    msg: format!("expected key=value, got {line:?}"),
                })?;
                cfg.set(k.trim(), v.trim())?;
            }
            offset += raw.len() as u64;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown config key {key:?}"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), Error> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("config key {key} is not declared"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, Error> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| Error::Config(format!("cannot parse {key}={raw:?}")))
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, Error> {
        let raw = self.raw(key);
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot parse {key}={raw:?}")))
            })
            .collect()
    }

    /// `None` for an empty value.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let raw = self.raw(key);
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    /// Output root: the `out` key, else `$MUCLAB_OUT`, else `muclab-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.path("out")
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("muclab-out"))
    }

    /// Every key in sorted order, one `key=value` per line.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_layers_over_defaults() {
        let cfg = RunConfig::parse(
            "# run\nseed = 7\nunlearn.beta=8 # strong\n\n",
            Path::new("c"),
        )
        .unwrap();
        assert_eq!(cfg.get::<u64>("seed").unwrap(), 7);
        assert_eq!(cfg.get::<f64>("unlearn.beta").unwrap(), 8.0);
        assert_eq!(cfg.get::<f64>("unlearn.gamma").unwrap(), 1.0);
    }

    #[test]
    fn unknown_keys_and_bad_lines_rejected() {
        assert!(matches!(
            RunConfig::parse("sede=1\n", Path::new("c")),
            Err(Error::Config(_))
        ));
        match RunConfig::parse("seed=1\nnonsense\n", Path::new("c")) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_override("no_equals").is_err());
        assert!(cfg.get::<u64>("unlearn.method").is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("sweep.beta=0,2").unwrap();
        let back = RunConfig::parse(&cfg.snapshot(), Path::new("s")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.list::<f64>("sweep.beta").unwrap(), vec![0.0, 2.0]);
    }
}

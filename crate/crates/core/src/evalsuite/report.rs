//! Five-metric evaluation reports and their gap to a retrained reference.

use std::fmt::Write as _;
use std::time::Instant;

use super::alignment::forgetting_score;
use super::mia::{cmia_efficacy, encoder_mi_efficacy, MiaConfig};
use super::probe::{classifier_metrics, linear_probe, ProbeConfig};
use crate::datagen::{LabeledDataset, Splits};
use crate::diffcore::EncoderNet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Metric names in report order.
pub const METRICS: [&str; 5] = ["emia", "ra", "ta", "ua", "cmia"];

/// White-box evaluation of one encoder. Percentages lie in `[0, 100]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub emia: f64,
    pub ra: f64,
    pub ta: f64,
    pub ua: f64,
    pub cmia: f64,
    pub fs: f64,
    /// Wall-clock seconds; not part of [`EvalReport::to_kv`].
    pub runtime: f64,
}

impl EvalReport {
    pub fn metrics(&self) -> [f64; 5] {
        [self.emia, self.ra, self.ta, self.ua, self.cmia]
    }

    /// Builds a report from the five metrics in [`METRICS`] order.
    pub fn from_metrics(m: [f64; 5], fs: f64) -> Result<Self> {
        if m.iter().any(|v| !(0.0..=100.0).contains(v)) {
            return Err(Error::Domain(format!("percentages outside [0, 100]: {m:?}")));
        }
        Ok(Self {
            emia: m[0],
            ra: m[1],
            ta: m[2],
            ua: m[3],
            cmia: m[4],
            fs,
            runtime: 0.0,
        })
    }

    /// Flat `key=value` lines. Wall-clock time is left out so that repeated
    /// runs produce identical text.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in METRICS.iter().zip(self.metrics()) {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "fs={}", self.fs);
        s
    }

    pub fn table_header() -> String {
        "name\temia\tra\tta\tua\tcmia\tfs".to_string()
    }

    pub fn table_row(&self, name: &str) -> String {
        let mut s = name.to_string();
        for v in self.metrics() {
            let _ = write!(s, "\t{v:.4}");
        }
        let _ = write!(s, "\t{:.6}", self.fs);
        s
    }
}

/// Per-metric absolute gaps to a reference and their summaries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapReport {
    pub gaps: [f64; 5],
    pub avg_gap: f64,
    /// Mean of `gap / reference` in percent over metrics with a usable
    /// reference; `None` if no metric qualifies.
    pub agp: Option<f64>,
}

impl GapReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, g) in METRICS.iter().zip(self.gaps) {
            let _ = writeln!(s, "gap_{k}={g}");
        }
        let _ = writeln!(s, "avg_gap={}", self.avg_gap);
        match self.agp {
            Some(a) => {
                let _ = writeln!(s, "agp={a}");
            }
            None => s.push_str("agp=undefined\n"),
        }
        s
    }
}

pub fn gap_report(candidate: &EvalReport, reference: &EvalReport) -> GapReport {
    let c = candidate.metrics();
    let r = reference.metrics();
    let mut gaps = [0.0; 5];
    let mut ratios = Vec::with_capacity(5);
    for i in 0..5 {
        gaps[i] = (c[i] - r[i]).abs();
        if r[i] != 0.0 {
            ratios.push(100.0 * gaps[i] / r[i].abs());
        } else if gaps[i] == 0.0 {
            ratios.push(0.0);
        } else {
            log::warn!("reference {} is 0: left out of the relative gap", METRICS[i]);
        }
    }
    GapReport {
        gaps,
        avg_gap: gaps.iter().sum::<f64>() / 5.0,
        agp: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EvalConfig {
    pub probe: ProbeConfig,
    pub mia: MiaConfig,
}

/// Full white-box evaluation of `candidate`, with the forgetting score taken
/// relative to `original`. The probe is trained on the candidate's retain
/// features.
pub fn evaluate<T: Scalar>(
    original: &EncoderNet<T>,
    candidate: &EncoderNet<T>,
    data: &LabeledDataset<T>,
    splits: &Splits,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let start = Instant::now();
    let (fs, _) = forgetting_score(
        original,
        candidate,
        data,
        &splits.unlearn,
        &cfg.mia.augment,
        cfg.mia.seed,
    )?;
    let head = linear_probe(candidate, data, &splits.retain, &cfg.probe)?;
    let acc = classifier_metrics(&head, candidate, data, splits)?;
    let emia = encoder_mi_efficacy(candidate, data, splits, &cfg.mia)?;
    let cmia = cmia_efficacy(&head, candidate, data, splits, cfg.mia.seed)?;
    let mut report = EvalReport::from_metrics(
        [100.0 * emia, acc.ra, acc.ta, acc.ua, 100.0 * cmia],
        fs.as_f64(),
    )?;
    report.runtime = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_reports_have_no_gap() {
        let r = EvalReport::from_metrics([50.0, 90.0, 88.0, 89.0, 30.0], 0.1).unwrap();
        let g = gap_report(&r, &r);
        assert_eq!(g.avg_gap, 0.0);
        assert_eq!(g.agp, Some(0.0));
    }

    #[test]
    fn hand_arithmetic() {
        let c = EvalReport::from_metrics([10.0, 20.0, 30.0, 40.0, 50.0], 0.0).unwrap();
        let r = EvalReport::from_metrics([12.0, 20.0, 25.0, 50.0, 0.0], 0.0).unwrap();
        let g = gap_report(&c, &r);
        assert_eq!(g.gaps, [2.0, 0.0, 5.0, 10.0, 50.0]);
        assert_abs_diff_eq!(g.avg_gap, 13.4, epsilon = 1e-12);
        // cmia reference is 0 with a nonzero gap, so only four ratios count
        let agp = (100.0 * 2.0 / 12.0 + 0.0 + 100.0 * 5.0 / 25.0 + 100.0 * 10.0 / 50.0) / 4.0;
        assert_abs_diff_eq!(g.agp.unwrap(), agp, epsilon = 1e-12);
    }

    #[test]
    fn kv_is_stable_and_excludes_runtime() {
        let mut r = EvalReport::from_metrics([1.0, 2.0, 3.0, 4.0, 5.0], -0.25).unwrap();
        let a = r.to_kv();
        r.runtime = 123.0;
        assert_eq!(a, r.to_kv());
        assert!(a.contains("fs=-0.25"));
        assert!(EvalReport::from_metrics([101.0, 0.0, 0.0, 0.0, 0.0], 0.0).is_err());
    }
}

//! Subcommand definitions and handlers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use muclab_core::evalsuite::{
    classifier_metrics, evaluate, forgetting_score, gap_report, linear_probe, owner_audit,
    welch_ttest, AuditFeatures, EvalReport, SummaryStats, METRICS,
};
use muclab_core::persist::{
    load_checkpoint, read_feature_dump, save_checkpoint, symmetric_range, write_dataset_csv,
    write_feature_dump, write_heatmap_pgm, write_matrix_csv, write_splits,
};
use muclab_core::{Encoder, Error, Result};

use crate::config::RunConfig;
use crate::pipeline::{self, write_text, Prepared};

#[derive(Debug, Parser)]
#[command(
    name = "muclab",
    version,
    about = "Contrastive unlearning experiments and audits"
)]
pub struct Cli {
    /// Config file of `key=value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory; takes precedence over the `out` key.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured dataset as CSV.
    GenData,
    /// Write the train/retain/unlearn/test/validation partition.
    Split,
    /// Contrastive pretraining on the train split.
    Pretrain,
    /// Apply `unlearn.method` to a pretrained encoder.
    Unlearn {
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a fresh encoder on the retain split.
    Retrain,
    /// Fit a linear head on retain features and report accuracies.
    Probe {
        #[arg(long)]
        encoder: Option<PathBuf>,
    },
    /// Evaluate a candidate encoder against a retrained reference.
    Eval {
        /// Encoder before unlearning.
        #[arg(long)]
        original: Option<PathBuf>,
        #[arg(long)]
        candidate: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Data-owner audit from feature dumps or checkpoints.
    Audit(AuditArgs),
    /// Welch t-test from summary statistics.
    Ttest(TtestArgs),
    /// Tabulate evaluation reports given as `NAME=PATH` pairs.
    Report {
        #[arg(required = true, value_name = "NAME=PATH")]
        inputs: Vec<String>,
        /// Name of the row the others are compared with.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Forgetting-score ratio over the alpha/beta grid.
    Sweep {
        /// Pretrained encoder; trained from the config if absent.
        #[arg(long)]
        encoder: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long, conflicts_with_all = ["before", "after", "null"])]
    pub before_dump: Option<PathBuf>,
    #[arg(long, requires = "before_dump")]
    pub after_dump: Option<PathBuf>,
    #[arg(long, requires = "before_dump")]
    pub null_dump: Option<PathBuf>,
    /// Checkpoint before unlearning.
    #[arg(long, requires = "after")]
    pub before: Option<PathBuf>,
    #[arg(long)]
    pub after: Option<PathBuf>,
    #[arg(long)]
    pub null: Option<PathBuf>,
    /// Ids to audit, separated by commas or whitespace; defaults to the
    /// unlearn split.
    #[arg(long)]
    pub ids: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mean_a: f64,
    #[arg(long)]
    pub std_a: f64,
    #[arg(long)]
    pub n_a: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub mean_b: f64,
    #[arg(long)]
    pub std_b: f64,
    #[arg(long)]
    pub n_b: usize,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GenData => "gen-data",
            Self::Split => "split",
            Self::Pretrain => "pretrain",
            Self::Unlearn { .. } => "unlearn",
            Self::Retrain => "retrain",
            Self::Probe { .. } => "probe",
            Self::Eval { .. } => "eval",
            Self::Audit(_) => "audit",
            Self::Ttest(_) => "ttest",
            Self::Report { .. } => "report",
            Self::Sweep { .. } => "sweep",
        }
    }
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Export(_) => 1,
        Error::Config(_) | Error::InvalidInput(_) | Error::Generation(_) => 2,
        Error::Format { .. } => 3,
        Error::Numeric(_) | Error::Domain(_) => 4,
    }
}

/// Resolves the config, writes its snapshot and runs the command. Returns
/// the text printed on stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(out) = &cli.out {
        cfg.set("out", &out.to_string_lossy())?;
    }
    let out = cfg.out_dir();
    write_text(
        &out.join(format!("config-{}.snapshot", cli.command.name())),
        &cfg.snapshot(),
    )?;
    log::info!("{} -> {}", cli.command.name(), out.display());

    match &cli.command {
        Command::GenData => {
            let data = pipeline::load_data(&cfg)?;
            let path = out.join("dataset.csv");
            write_dataset_csv(&data, &path)?;
            Ok(format!(
                "wrote {} samples to {}\n",
                data.len(),
                path.display()
            ))
        }
        Command::Split => {
            let data = pipeline::load_data(&cfg)?;
            let splits = pipeline::load_splits(&cfg, &data)?;
            let path = out.join("splits.txt");
            write_splits(&splits, &path)?;
            Ok(format!(
                "retain={} unlearn={} test={} validation={}\n",
                splits.retain.len(),
                splits.unlearn.len(),
                splits.test.len(),
                splits.validation.len()
            ))
        }
        Command::Pretrain => {
            let prep = Prepared::new(&cfg)?;
            let path = out.join("encoder.muck");
            save_checkpoint(&prep.pretrain(&cfg)?, &path)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        Command::Unlearn { encoder, output } => {
            let prep = Prepared::new(&cfg)?;
            let original = load_or(&out, encoder, "encoder.muck")?;
            let path = output.clone().unwrap_or_else(|| out.join("unlearned.muck"));
            save_checkpoint(&prep.unlearn(&cfg, &original)?, &path)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        Command::Retrain => {
            let prep = Prepared::new(&cfg)?;
            let path = out.join("retrain.muck");
            save_checkpoint(&prep.retrain(&cfg)?, &path)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        Command::Probe { encoder } => {
            let prep = Prepared::new(&cfg)?;
            let enc = load_or(&out, encoder, "unlearned.muck")?;
            let head = linear_probe(
                &enc,
                &prep.data,
                &prep.splits.retain,
                &pipeline::probe(&cfg)?,
            )?;
            let acc = classifier_metrics(&head, &enc, &prep.data, &prep.splits)?;
            save_checkpoint(head.net(), out.join("head.muck"))?;
            let kv = format!("ra={}\nta={}\nua={}\n", acc.ra, acc.ta, acc.ua);
            write_text(&out.join("probe.kv"), &kv)?;
            Ok(kv)
        }
        Command::Eval {
            original,
            candidate,
            reference,
        } => {
            let prep = Prepared::new(&cfg)?;
            let g = load_or(&out, original, "encoder.muck")?;
            let cand = load_or(&out, candidate, "unlearned.muck")?;
            let refr = load_or(&out, reference, "retrain.muck")?;
            let ecfg = pipeline::eval(&cfg)?;
            let c = evaluate(&g, &cand, &prep.data, &prep.splits, &ecfg)?;
            let r = evaluate(&g, &refr, &prep.data, &prep.splits, &ecfg)?;
            log::info!("evaluation took {:.2}s and {:.2}s", c.runtime, r.runtime);
            let gap = gap_report(&c, &r);
            write_text(&out.join("eval.kv"), &c.to_kv())?;
            write_text(&out.join("reference.kv"), &r.to_kv())?;
            write_text(&out.join("gap.kv"), &gap.to_kv())?;
            let table = format!(
                "{}\n{}\n{}\n",
                EvalReport::table_header(),
                c.table_row(cfg.raw("unlearn.method")),
                r.table_row("retrain")
            );
            write_text(&out.join("eval.tsv"), &table)?;
            Ok(format!("{table}{}", gap.to_kv()))
        }
        Command::Audit(args) => audit(&cfg, &out, args),
        Command::Ttest(a) => {
            let r = welch_ttest(
                SummaryStats::new(a.mean_a, a.std_a, a.n_a)?,
                SummaryStats::new(a.mean_b, a.std_b, a.n_b)?,
            )?;
            Ok(format!(
                "t={:.6}\ndf={:.6}\np={:.6}\n",
                r.t_statistic, r.degrees_of_freedom, r.p_value
            ))
        }
        Command::Report { inputs, reference } => report(&out, inputs, reference.as_deref()),
        Command::Sweep { encoder } => sweep(&cfg, &out, encoder),
    }
}

fn load_or(out: &Path, given: &Option<PathBuf>, default: &str) -> Result<Encoder> {
    load_checkpoint(given.clone().unwrap_or_else(|| out.join(default)))
}

fn read_ids(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut offset = 0u64;
    let mut ids = Vec::new();
    for tok in text.split(|c: char| c == ',' || c.is_whitespace()) {
        if !tok.is_empty() {
            ids.push(tok.parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                offset,
                msg: format!("bad id {tok:?}"),
            })?);
        }
        offset += tok.len() as u64 + 1;
    }
    Ok(ids)
}

fn load_dump(path: &Path) -> Result<AuditFeatures> {
    let (ids, joined) = read_feature_dump(path)?;
    AuditFeatures::from_dump(ids, &joined)
}

fn audit(cfg: &RunConfig, out: &Path, args: &AuditArgs) -> Result<String> {
    let (before, after, null) = if let Some(b) = &args.before_dump {
        let a = args
            .after_dump
            .as_ref()
            .ok_or_else(|| Error::Config("--after-dump is required with --before-dump".into()))?;
        (
            load_dump(b)?,
            load_dump(a)?,
            args.null_dump.as_deref().map(load_dump).transpose()?,
        )
    } else {
        let (Some(b), Some(a)) = (&args.before, &args.after) else {
            return Err(Error::Config(
                "audit needs --before-dump/--after-dump or --before/--after".into(),
            ));
        };
        let prep = Prepared::new(cfg)?;
        let ids = match &args.ids {
            Some(p) => read_ids(p)?,
            None => prep.splits.unlearn.clone(),
        };
        let aug = pipeline::augment(cfg)?;
        let seed: u64 = cfg.get("seed")?;
        let feats = |p: &Path, name: &str| -> Result<AuditFeatures> {
            let enc: Encoder = load_checkpoint(p)?;
            let f = AuditFeatures::from_encoder(&enc, &prep.data, &ids, &aug, seed)?;
            write_feature_dump(&f.ids, &f.joined(), out.join(format!("{name}.dump.csv")))?;
            Ok(f)
        };
        (
            feats(b, "before")?,
            feats(a, "after")?,
            args.null.as_deref().map(|p| feats(p, "null")).transpose()?,
        )
    };
    let report = owner_audit(&before, &after, null.as_ref())?;
    write_text(&out.join("audit.kv"), &report.to_kv())?;
    write_matrix_csv(&report.agm.values, out.join("agm.csv"))?;
    write_matrix_csv(&report.am_before.values, out.join("am_before.csv"))?;
    write_matrix_csv(&report.am_after.values, out.join("am_after.csv"))?;
    write_heatmap_pgm(
        &report.agm.values,
        out.join("agm.pgm"),
        symmetric_range(&report.agm.values),
    )?;
    Ok(report.to_kv())
}

/// Reads the metric keys of an evaluation `key=value` file.
pub fn read_eval_kv(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut metrics = [None; 5];
    let mut fs = None;
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        if let Some((k, v)) = line.trim().split_once('=') {
            let bad = || Error::Format {
                path: path.to_path_buf(),
                offset,
                msg: format!("bad value for {k}"),
            };
            if k == "fs" {
                fs = Some(v.parse::<f64>().map_err(|_| bad())?);
            } else if let Some(i) = METRICS.iter().position(|m| *m == k) {
                metrics[i] = Some(v.parse::<f64>().map_err(|_| bad())?);
            }
        }
        offset += line.len() as u64;
    }
    let mut m = [0.0; 5];
    for (i, v) in metrics.iter().enumerate() {
        m[i] = v.ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            offset,
            msg: format!("missing {}", METRICS[i]),
        })?;
    }
    let fs = fs.ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        offset,
        msg: "missing fs".into(),
    })?;
    EvalReport::from_metrics(m, fs)
}

fn report(out: &Path, inputs: &[String], reference: Option<&str>) -> Result<String> {
    let mut rows = Vec::with_capacity(inputs.len());
    for item in inputs {
        let (name, path) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("report input {item:?} is not NAME=PATH")))?;
        rows.push((name.to_string(), read_eval_kv(Path::new(path))?));
    }
    let refr = match reference {
        Some(name) => Some(
            rows.iter()
                .find(|(n, _)| n == name)
                .map(|(_, r)| *r)
                .ok_or_else(|| Error::Config(format!("no report named {name:?}")))?,
        ),
        None => None,
    };
    let mut table = EvalReport::table_header();
    if refr.is_some() {
        table.push_str("\tavg_gap");
    }
    table.push('\n');
    for (name, r) in &rows {
        table.push_str(&r.table_row(name));
        if let Some(rr) = &refr {
            let _ = write!(table, "\t{:.4}", gap_report(r, rr).avg_gap);
        }
        table.push('\n');
    }
    write_text(&out.join("report.tsv"), &table)?;
    Ok(table)
}

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub fs_ac: f64,
    pub fs_rt: f64,
    /// `fs_rt / fs_ac`; values near 1 mean AC forgets as much as retraining.
    pub ratio: f64,
}

fn sweep(cfg: &RunConfig, out: &Path, encoder: &Option<PathBuf>) -> Result<String> {
    let prep = Prepared::new(cfg)?;
    let original = match encoder {
        Some(p) => load_checkpoint(p)?,
        None => prep.pretrain(cfg)?,
    };
    let aug = pipeline::augment(cfg)?;
    let seed: u64 = cfg.get("seed")?;
    let fs_of = |g_hat: &Encoder| -> Result<f64> {
        Ok(forgetting_score(
            &original,
            g_hat,
            &prep.data,
            &prep.splits.unlearn,
            &aug,
            seed,
        )?
        .0)
    };
    let fs_rt = fs_of(&prep.retrain(cfg)?)?;

    let alphas: Vec<f64> = cfg.list("sweep.alpha")?;
    let betas: Vec<f64> = cfg.list("sweep.beta")?;
    let grid: Vec<(usize, f64, f64)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .enumerate()
        .map(|(i, (a, b))| (i, a, b))
        .collect();
    let job = |&(i, alpha, beta): &(usize, f64, f64)| -> Result<SweepRow> {
        let mut jc = cfg.clone();
        jc.set("unlearn.method", "ac")?;
        jc.set("unlearn.alpha", &alpha.to_string())?;
        jc.set("unlearn.gamma", &alpha.to_string())?;
        jc.set("unlearn.beta", &beta.to_string())?;
        let dir = out.join("sweep").join(format!("job{i:03}"));
        jc.set("out", &dir.to_string_lossy())?;
        write_text(&dir.join("config-sweep.snapshot"), &jc.snapshot())?;
        let g_hat = prep.unlearn(&jc, &original)?;
        save_checkpoint(&g_hat, dir.join("unlearned.muck"))?;
        let fs_ac = fs_of(&g_hat)?;
        Ok(SweepRow {
            alpha,
            beta,
            gamma: alpha,
            fs_ac,
            fs_rt,
            ratio: if fs_ac != 0.0 {
                fs_rt / fs_ac
            } else {
                f64::INFINITY
            },
        })
    };
    let jobs: usize = cfg.get("sweep.jobs")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} sweep workers: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| grid.par_iter().map(job).collect::<Result<_>>())?;

    let mut table = String::from("alpha\tbeta\tgamma\tfs_ac\tfs_rt\tratio\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.4}",
            r.alpha, r.beta, r.gamma, r.fs_ac, r.fs_rt, r.ratio
        );
    }
    write_text(&out.join("sweep.tsv"), &table)?;
    Ok(table)
}

use std::path::Path;
use std::process::{Command, Output};

use muclab_core::persist::write_feature_dump;
use muclab_core::Matrix;
use tempfile::tempdir;

fn muclab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muclab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn kv(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn ttest_prints_welch_p_value() {
    let dir = tempdir().unwrap();
    let o = muclab(
        dir.path(),
        &[
            "ttest", "--mean-a", "-0.0026", "--std-a", "0.0587", "--n-a", "20", "--mean-b",
            "0.0353", "--std-b", "0.0575", "--n-b", "20",
        ],
    );
    let p = kv(&stdout(&o), "p");
    assert!((p - 0.0459).abs() < 0.005, "p = {p}");
    assert!(dir.path().join("config-ttest.snapshot").exists());
}

#[test]
fn audit_of_identical_dumps() {
    let dir = tempdir().unwrap();
    let rows: Vec<Vec<f64>> = (0..6)
        .map(|i| (0..8).map(|j| ((i * 8 + j) as f64 * 0.7).sin()).collect())
        .collect();
    let dump = dir.path().join("g.csv");
    write_feature_dump(
        &[4, 8, 15, 16, 23, 42],
        &Matrix::from_rows(&rows).unwrap(),
        &dump,
    )
    .unwrap();
    let d = dump.to_str().unwrap();
    let text = stdout(&muclab(
        dir.path(),
        &["audit", "--before-dump", d, "--after-dump", d],
    ));
    assert_eq!(kv(&text, "fs"), 0.0);
    assert_eq!(kv(&text, "fs_p"), 1.0);
    assert_eq!(kv(&text, "neg_p"), 1.0);
    let agm = std::fs::read_to_string(dir.path().join("agm.csv")).unwrap();
    assert_eq!(agm.lines().count(), 6);
    assert!(agm
        .split([',', '\n'])
        .filter(|s| !s.is_empty())
        .all(|v| v.parse::<f64>().unwrap() == 0.0));
    assert!(dir.path().join("agm.pgm").exists());
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempdir().unwrap();
    let o = muclab(dir.path(), &["pretrain", "--set", "no.such.key=1"]);
    assert_eq!(o.status.code(), Some(2));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,dim0,dim1\n1,0.5\n").unwrap();
    let b = bad.to_str().unwrap();
    let o = muclab(
        dir.path(),
        &["audit", "--before-dump", b, "--after-dump", b],
    );
    assert_eq!(o.status.code(), Some(3));
    let missing = dir.path().join("nope.muck");
    let o = muclab(
        dir.path(),
        &["unlearn", "--encoder", missing.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = muclab(
        dir.path(),
        &[
            "ttest", "--mean-a", "0", "--std-a", "0", "--n-a", "3", "--mean-b", "1", "--std-b",
            "0", "--n-b", "3",
        ],
    );
    assert_eq!(o.status.code(), Some(4));
}

const SMALL: &[&str] = &[
    "--set",
    "data.samples=300",
    "--set",
    "pretrain.epochs=5",
    "--set",
    "unlearn.epochs=2",
    "--set",
    "probe.epochs=10",
    "--set",
    "eval.n_aug=3",
];

fn pipeline(out: &Path) {
    for cmd in [
        "gen-data", "split", "pretrain", "unlearn", "retrain", "probe", "eval",
    ] {
        let mut args = vec![cmd];
        args.extend_from_slice(SMALL);
        stdout(&muclab(out, &args));
    }
}

#[test]
fn small_pipeline_is_deterministic() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let report = std::fs::read_to_string(a.path().join("eval.tsv")).unwrap();
    assert_eq!(report.lines().count(), 3);
    let gap = std::fs::read_to_string(a.path().join("gap.kv")).unwrap();
    assert!(kv(&gap, "avg_gap") >= 0.0);
    for f in [
        "dataset.csv",
        "splits.txt",
        "encoder.muck",
        "unlearned.muck",
        "retrain.muck",
        "head.muck",
        "probe.kv",
        "eval.kv",
        "reference.kv",
        "gap.kv",
        "eval.tsv",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn config_file_and_snapshot() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# tiny\ndata.samples = 120\ndata.clusters=3\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_muclab"))
        .args(["gen-data", "--config", cfg.to_str().unwrap()])
        .env("MUCLAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(stdout(&o).contains("120 samples"));
    let snap = std::fs::read_to_string(dir.path().join("config-gen-data.snapshot")).unwrap();
    assert!(snap.contains("data.clusters=3\n") && snap.contains("unlearn.beta=0\n"));
}

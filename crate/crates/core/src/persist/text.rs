//! Text formats: feature dumps, matrix CSV, dataset CSV and split files.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::datagen::{LabeledDataset, Splits};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Lines paired with the byte offset at which each starts.
fn lines_with_offsets(text: &str) -> impl Iterator<Item = (u64, &str)> {
    let mut offset = 0u64;
    text.split_inclusive('\n').map(move |raw| {
        let at = offset;
        offset += raw.len() as u64;
        (at, raw.trim_end_matches(['\n', '\r']))
    })
}

fn check_finite<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if m.all_finite() {
        Ok(())
    } else {
        Err(Error::Export("matrix has non-finite entries".into()))
    }
}

/// Writes `id,dim0..dimK` followed by one row per sample.
pub fn write_feature_dump<T: Scalar>(
    ids: &[u64],
    feats: &Matrix<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    if ids.len() != feats.rows() {
        return Err(Error::InvalidInput(format!(
            "{} ids for {} feature rows",
            ids.len(),
            feats.rows()
        )));
    }
    let mut seen = HashSet::with_capacity(ids.len());
    if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
        return Err(Error::InvalidInput(format!("duplicate id {dup} in feature dump")));
    }
    check_finite(feats)?;
    let mut s = String::from("id");
    for k in 0..feats.cols() {
        let _ = write!(s, ",dim{k}");
    }
    s.push('\n');
    for (id, row) in ids.iter().zip(feats.iter_rows()) {
        let _ = write!(s, "{id}");
        for v in row {
            let _ = write!(s, ",{:.16e}", v.as_f64());
        }
        s.push('\n');
    }
    write_text(path.as_ref(), &s)
}

/// Reads a feature dump back as ids in file order plus features.
pub fn read_feature_dump(path: impl AsRef<Path>) -> Result<(Vec<u64>, Matrix<f64>)> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = lines_with_offsets(&text);
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, 0, "missing header"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"id") {
        return Err(Error::format(path, 0, "header must start with id"));
    }
    for (k, c) in cols.iter().enumerate().skip(1) {
        if *c != format!("dim{}", k - 1) {
            return Err(Error::format(path, 0, format!("unexpected column {c:?}")));
        }
    }
    let dim = cols.len() - 1;
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut values = Vec::new();
    for (at, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::format(
                path,
                at,
                format!("row has {} fields, header has {}", fields.len(), dim + 1),
            ));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| Error::format(path, at, format!("bad id {:?}", fields[0])))?;
        if !seen.insert(id) {
            return Err(Error::format(path, at, format!("duplicate id {id}")));
        }
        ids.push(id);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::format(path, at, format!("bad value {f:?}")))?;
            values.push(v);
        }
    }
    let n = ids.len();
    Ok((ids, Matrix::from_vec(n, dim, values)?))
}

/// Comma-separated rows with full precision and no header.
pub fn write_matrix_csv<T: Scalar>(matrix: &Matrix<T>, path: impl AsRef<Path>) -> Result<()> {
    check_finite(matrix)?;
    let mut s = String::new();
    for row in matrix.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    write_text(path.as_ref(), &s)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (at, line) in lines_with_offsets(&text) {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.parse().map_err(|_| Error::format(path, at, format!("bad value {f:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(Error::format(path, at, "ragged row"));
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    Matrix::from_vec(n, cols, rows.concat())
}

/// `id,label,x0..xK` rows; the class count is stored in a leading
/// `# classes=K` line.
pub fn write_dataset_csv<T: Scalar>(data: &LabeledDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    check_finite(data.samples())?;
    let mut s = format!("# classes={}\nid,label", data.num_classes());
    for k in 0..data.dim() {
        let _ = write!(s, ",x{k}");
    }
    s.push('\n');
    for r in 0..data.len() {
        let _ = write!(s, "{},{}", data.ids()[r], data.labels()[r]);
        for v in data.sample(r) {
            let _ = write!(s, ",{:.16e}", v.as_f64());
        }
        s.push('\n');
    }
    write_text(path.as_ref(), &s)
}

pub fn read_dataset_csv(path: impl AsRef<Path>) -> Result<LabeledDataset<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut lines = lines_with_offsets(&text);
    let classes: usize = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix("# classes="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format(path, 0, "expected '# classes=K' line"))?;
    let (hat, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, 0, "missing header"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "label" {
        return Err(Error::format(path, hat, "header must be id,label,x0,..."));
    }
    let dim = cols.len() - 2;
    let (mut ids, mut labels, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for (at, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::format(path, at, "row width differs from header"));
        }
        let bad = |what: &str| Error::format(path, at, format!("bad {what}"));
        ids.push(fields[0].parse::<u64>().map_err(|_| bad("id"))?);
        labels.push(fields[1].parse::<usize>().map_err(|_| bad("label"))?);
        for f in &fields[2..] {
            values.push(f.parse::<f64>().map_err(|_| bad("value"))?);
        }
    }
    let n = ids.len();
    LabeledDataset::new(Matrix::from_vec(n, dim, values)?, labels, ids, classes)
}

const SPLIT_KEYS: [&str; 5] = ["train", "retain", "unlearn", "test", "validation"];

/// One `name=id,id,...` line per split.
pub fn write_splits(splits: &Splits, path: impl AsRef<Path>) -> Result<()> {
    let lists = [
        &splits.train,
        &splits.retain,
        &splits.unlearn,
        &splits.test,
        &splits.validation,
    ];
    let mut s = String::new();
    for (k, ids) in SPLIT_KEYS.iter().zip(lists) {
        let joined: Vec<String> = ids.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "{k}={}", joined.join(","));
    }
    write_text(path.as_ref(), &s)
}

pub fn read_splits(path: impl AsRef<Path>) -> Result<Splits> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Splits::default();
    let mut found = [false; 5];
    for (at, line) in lines_with_offsets(&text) {
        if line.is_empty() {
            continue;
        }
        let (key, list) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, at, "expected name=ids"))?;
        let idx = SPLIT_KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| Error::format(path, at, format!("unknown split {key:?}")))?;
        if found[idx] {
            return Err(Error::format(path, at, format!("split {key} given twice")));
        }
        found[idx] = true;
        let ids = if list.is_empty() {
            Vec::new()
        } else {
            list.split(',')
                .map(|v| v.parse::<u64>().map_err(|_| Error::format(path, at, format!("bad id {v:?}"))))
                .collect::<Result<Vec<u64>>>()?
        };
        let slot = match idx {
            0 => &mut out.train,
            1 => &mut out.retain,
            2 => &mut out.unlearn,
            3 => &mut out.test,
            _ => &mut out.validation,
        };
        *slot = ids;
    }
    if let Some(i) = found.iter().position(|f| !f) {
        return Err(Error::format(
            path,
            text.len() as u64,
            format!("missing split {}", SPLIT_KEYS[i]),
        ));
    }
    out.validate()?;
    Ok(out)
}

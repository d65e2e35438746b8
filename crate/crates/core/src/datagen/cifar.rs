use std::fs;
use std::path::{Path, PathBuf};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Pixel bytes per record: three 32x32 planes (R, G, B), row-major.
pub const CIFAR_PIXELS: usize = 3072;
/// Label byte plus pixels.
pub const CIFAR_RECORD: usize = CIFAR_PIXELS + 1;
pub const CIFAR_RECORDS_PER_FILE: usize = 10_000;

/// Reads CIFAR-10 binary batches.
///
/// `path` is either a single batch file or a directory whose `*.bin` files are
/// read in name order. At most `max_per_batch` records are taken from each
/// file; the sample id is `file_index * 10000 + record_index`.
pub fn load_cifar10<T: Scalar>(path: &Path, max_per_batch: usize) -> Result<LabeledDataset<T>> {
    let files = batch_files(path)?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let scale = T::lit(255.0);
    for (file_idx, file) in files.iter().enumerate() {
        let bytes = fs::read(file).map_err(|e| Error::io(file, e))?;
        if bytes.is_empty()
            || bytes.len() % CIFAR_RECORD != 0
            || bytes.len() / CIFAR_RECORD > CIFAR_RECORDS_PER_FILE
        {
            return Err(Error::format(
                file,
                bytes.len() as u64,
                format!(
                    "size {} is not a whole number of {CIFAR_RECORD}-byte records (max {CIFAR_RECORDS_PER_FILE})",
                    bytes.len()
                ),
            ));
        }
        for (rec_idx, record) in bytes
            .chunks_exact(CIFAR_RECORD)
            .take(max_per_batch)
            .enumerate()
        {
            let label = record[0];
            if label > 9 {
                return Err(Error::format(
                    file,
                    (rec_idx * CIFAR_RECORD) as u64,
                    format!("label byte {label} exceeds 9"),
                ));
            }
            labels.push(label as usize);
            ids.push((file_idx * CIFAR_RECORDS_PER_FILE + rec_idx) as u64);
            data.extend(record[1..].iter().map(|&b| T::from_count(b as usize) / scale));
        }
    }
    let n = labels.len();
    LabeledDataset::new(Matrix::from_vec(n, CIFAR_PIXELS, data)?, labels, ids, 10)
}

fn batch_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "bin"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no .bin batch files under {}",
            path.display()
        )));
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn single_zero_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.bin", &[0u8; CIFAR_RECORD]);
        let d = load_cifar10::<f64>(&p, 1).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.labels(), &[0]);
        assert!(d.sample(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.bin", &[0u8; CIFAR_PIXELS]);
        assert!(matches!(load_cifar10::<f64>(&p, 1), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = vec![0u8; 2 * CIFAR_RECORD];
        bytes[CIFAR_RECORD] = 10;
        let p = write(dir.path(), "a.bin", &bytes);
        match load_cifar10::<f64>(&p, 5) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, CIFAR_RECORD as u64),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn crafted_records_decode_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = vec![0u8; 2 * CIFAR_RECORD];
        // record 0: label 3, red plane starts 255, 51; green plane starts 102
        bytes[0] = 3;
        bytes[1] = 255;
        bytes[2] = 51;
        bytes[1 + 1024] = 102;
        // record 1: label 9, last blue pixel 204
        bytes[CIFAR_RECORD] = 9;
        bytes[2 * CIFAR_RECORD - 1] = 204;
        write(dir.path(), "data_batch_1.bin", &bytes);
        write(dir.path(), "data_batch_2.bin", &bytes[..CIFAR_RECORD]);
        let d = load_cifar10::<f64>(dir.path(), 10).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.labels(), &[3, 9, 3]);
        assert_eq!(d.ids(), &[0, 1, 10_000]);
        let s0 = d.sample(0);
        assert_eq!(s0[0], 1.0);
        assert_eq!(s0[1], 0.2);
        assert_eq!(s0[1024], 0.4);
        assert_eq!(d.sample(1)[CIFAR_PIXELS - 1], 0.8);

        let capped = load_cifar10::<f64>(dir.path(), 1).unwrap();
        assert_eq!(capped.ids(), &[0, 10_000]);
    }
}

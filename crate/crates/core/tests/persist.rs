use muclab_core::datagen::{gen_synthetic, split, AugmentorConfig};
use muclab_core::diffcore::{gaussian_matrix, DenseLayer, EncoderNet};
use muclab_core::evalsuite::{alignment_gap, alignment_matrix_with_ids, paired_unlearn_views};
use muclab_core::persist::*;
use muclab_core::seed::{self, Stream};
use muclab_core::{Error, Matrix};
use proptest::prelude::*;
use tempfile::tempdir;

#[test]
fn one_by_one_checkpoint_bytes() {
    let layer = DenseLayer::new(Matrix::from_vec(1, 1, vec![1.5]).unwrap(), vec![-2.0]).unwrap();
    let net = EncoderNet::new(vec![layer], true).unwrap();
    let bytes = encode_checkpoint(&net);
    let mut expected = b"MUCK".to_vec();
    for v in [1u32, 1, 1, 1, 1] {
        expected.extend(v.to_le_bytes());
    }
    expected.extend(1.5f64.to_le_bytes());
    expected.extend((-2.0f64).to_le_bytes());
    assert_eq!(bytes.len(), 40);
    assert_eq!(bytes, expected);
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("enc.muck");
    let mut net = EncoderNet::<f64>::init(&[16, 32, 16], true, 7).unwrap();
    // awkward values survive too
    *net.params_mut().next().unwrap() = -0.0;
    *net.params_mut().nth(1).unwrap() = f64::MIN_POSITIVE / 4.0;
    save_checkpoint(&net, &path).unwrap();
    let back: EncoderNet<f64> = load_checkpoint(&path).unwrap();
    assert_eq!(back.normalize_output(), net.normalize_output());
    for (a, b) in net.params().zip(back.params()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(std::fs::read(&path).unwrap(), encode_checkpoint(&back));
}

#[test]
fn corrupt_checkpoints_report_offsets() {
    let net = EncoderNet::<f64>::init(&[3, 2], false, 1).unwrap();
    let good = encode_checkpoint(&net);
    let p = std::path::Path::new("x");

    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(matches!(decode_checkpoint::<f64>(&bad_magic, p), Err(Error::Format { offset: 0, .. })));

    let mut bad_version = good.clone();
    bad_version[4] = 9;
    assert!(matches!(decode_checkpoint::<f64>(&bad_version, p), Err(Error::Format { offset: 4, .. })));

    let truncated = &good[..good.len() - 3];
    match decode_checkpoint::<f64>(truncated, p) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, truncated.len() as u64),
        other => panic!("{other:?}"),
    }
    let mut long = good.clone();
    long.push(0);
    assert!(matches!(
        decode_checkpoint::<f64>(&long, p),
        Err(Error::Format { offset, .. }) if offset == good.len() as u64
    ));
}

#[test]
fn feature_dump_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("f.csv");
    let feats = gaussian_matrix::<f64, _>(4, 3, &mut seed::rng(1, Stream::Synthetic, &[]));
    let ids = [9, 3, 7, 100];
    write_feature_dump(&ids, &feats, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("id,dim0,dim1,dim2\n9,"));
    let (ids2, back) = read_feature_dump(&path).unwrap();
    assert_eq!(ids2, ids);
    for (a, b) in feats.as_slice().iter().zip(back.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }

    write_feature_dump(&[], &Matrix::<f64>::zeros(0, 3), &path).unwrap();
    let (ids, m) = read_feature_dump(&path).unwrap();
    assert!(ids.is_empty());
    assert_eq!(m.rows(), 0);
}

#[test]
fn malformed_dumps_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "id,dim0,dim1\n1,0.5,0.5\n2,0.5\n").unwrap();
    match read_feature_dump(&path) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, 23),
        other => panic!("{other:?}"),
    }
    std::fs::write(&path, "id,dim0\n1,0.5\n1,0.25\n").unwrap();
    assert!(matches!(read_feature_dump(&path), Err(Error::Format { .. })));
    let m = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
    assert!(write_feature_dump(&[4, 4], &m, &path).is_err());
}

proptest! {
    #[test]
    fn dumps_round_trip_any_finite_values(values in prop::collection::vec(-1e300f64..1e300, 1..40)) {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let m = Matrix::from_vec(values.len(), 1, values.clone()).unwrap();
        let ids: Vec<u64> = (0..values.len() as u64).collect();
        write_feature_dump(&ids, &m, &path).unwrap();
        let (_, back) = read_feature_dump(&path).unwrap();
        prop_assert_eq!(back.as_slice(), &values[..]);
    }
}

#[test]
fn dumps_feed_alignment_gap() {
    let dir = tempdir().unwrap();
    let data = gen_synthetic(3, 5, 60, 5.0, 2).unwrap();
    let splits = split(&data, 0.2, 0.2, 0.1, 2).unwrap();
    let (vx, vy) = paired_unlearn_views(&data, &splits.unlearn, &AugmentorConfig::default(), 0)
        .unwrap();
    let mut gaps = Vec::new();
    for (k, net) in [
        EncoderNet::<f64>::init(&[5, 8, 4], true, 1).unwrap(),
        EncoderNet::init(&[5, 8, 4], true, 2).unwrap(),
    ]
    .iter()
    .enumerate()
    {
        let px = dir.path().join(format!("x{k}.csv"));
        let py = dir.path().join(format!("y{k}.csv"));
        write_feature_dump(&splits.unlearn, &net.forward(&vx).unwrap(), &px).unwrap();
        write_feature_dump(&splits.unlearn, &net.forward(&vy).unwrap(), &py).unwrap();
        let (ids, fx) = read_feature_dump(&px).unwrap();
        let (_, fy) = read_feature_dump(&py).unwrap();
        gaps.push(alignment_matrix_with_ids(&ids, &fx, &fy).unwrap());
    }
    let agm = alignment_gap(&gaps[0], &gaps[1], ("g1", "g2")).unwrap();
    assert_eq!(agm.row_ids, splits.unlearn);
    assert!(agm.values.max_abs() > 0.0);
}

#[test]
fn pgm_pixels() {
    let m = Matrix::from_rows(&[vec![-1.0, 1.0], vec![0.0, 0.5]]).unwrap();
    let bytes = encode_pgm(&m, (-1.0, 1.0)).unwrap();
    let header = b"P5\n# range -1e0 1e0\n2 2\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    // 0.5 maps to 0.75 * 255 = 191.25
    assert_eq!(&bytes[header.len()..], &[0, 255, 128, 191]);

    let flat = Matrix::from_vec(2, 3, vec![0.3; 6]).unwrap();
    let px = encode_pgm(&flat, (-0.2, 0.8)).unwrap();
    assert!(px[px.len() - 6..].iter().all(|&p| p == 128));

    // clamping and monotonicity
    let ramp = Matrix::from_vec(1, 7, vec![-5.0, -1.0, -0.3, 0.0, 0.2, 1.0, 5.0]).unwrap();
    let p = encode_pgm(&ramp, (-1.0, 1.0)).unwrap();
    let px = &p[p.len() - 7..];
    assert_eq!((px[0], px[6]), (0, 255));
    assert!(px.windows(2).all(|w| w[0] <= w[1]));

    assert_eq!(symmetric_range(&m), (-1.0, 1.0));
    let bad = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
    assert!(matches!(encode_pgm(&bad, (-1.0, 1.0)), Err(Error::Export(_))));
    let dir = tempdir().unwrap();
    assert!(write_matrix_csv(&bad, dir.path().join("m.csv")).is_err());
}

#[test]
fn matrix_dataset_and_split_files_round_trip() {
    let dir = tempdir().unwrap();
    let data = gen_synthetic(3, 4, 30, 5.0, 1).unwrap();
    write_dataset_csv(&data, dir.path().join("d.csv")).unwrap();
    assert_eq!(read_dataset_csv(dir.path().join("d.csv")).unwrap(), data);

    let splits = split(&data, 0.2, 0.2, 0.1, 1).unwrap();
    write_splits(&splits, dir.path().join("s.txt")).unwrap();
    assert_eq!(read_splits(dir.path().join("s.txt")).unwrap(), splits);

    let m = gaussian_matrix::<f64, _>(3, 5, &mut seed::rng(0, Stream::Synthetic, &[]));
    write_matrix_csv(&m, dir.path().join("m.csv")).unwrap();
    assert_eq!(read_matrix_csv(dir.path().join("m.csv")).unwrap(), m);

    std::fs::write(dir.path().join("s.txt"), "train=1\n").unwrap();
    assert!(read_splits(dir.path().join("s.txt")).is_err());
}

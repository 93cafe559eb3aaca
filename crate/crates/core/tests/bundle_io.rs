use std::fs;
use std::path::Path;

use gatingae::data::{load_bundle_with_warnings, BundleManifest, FEATURES_FILE, LABELS_FILE, MANIFEST_FILE};
use gatingae::{generate_synthetic, load_bundle, save_bundle, DatasetBundle, Error, Matrix, SplitSpec, SynthSpec};

/// Second FNV-1a 64 implementation, written against the published
/// constants rather than shared with the library.
fn fnv_reference(data: &[u8]) -> String {
    const OFFSET: u128 = 14695981039346656037;
    const PRIME: u128 = 1099511628211;
    let mut h = OFFSET;
    for b in data {
        h ^= *b as u128;
        h = (h * PRIME) % (1u128 << 64);
    }
    format!("{h:016x}")
}

/// Three classes, six rows: classes 0 and 1 seen, class 2 unseen.
fn hand_bundle() -> DatasetBundle {
    let features = Matrix::from_rows(&[
        vec![0.0, 1.0],
        vec![0.5, 1.5],
        vec![4.0, 4.0],
        vec![4.5, 3.5],
        vec![9.0, 0.0],
        vec![0.25, 0.75],
    ])
    .unwrap();
    DatasetBundle {
        features,
        labels: vec![0, 0, 1, 1, 2, 0],
        attributes: Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap(),
        splits: SplitSpec {
            train_idx: vec![0, 2],
            val_idx: vec![1, 3],
            test_seen_idx: vec![5],
            test_unseen_idx: vec![4],
            seen_classes: vec![0, 1],
            unseen_classes: vec![2],
            val_unseen_classes: vec![1],
        },
        class_names: Some(vec!["a".into(), "b".into(), "c".into()]),
        normalization: None,
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn hand_written_bundle_loads_with_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let b = hand_bundle();
    save_bundle(&b, dir.path()).unwrap();
    let (back, warnings) = load_bundle_with_warnings(dir.path()).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(back, b);
    assert_eq!(back.features.shape(), (6, 2));
    assert_eq!(back.attributes.shape(), (3, 3));
    assert_eq!(back.num_classes(), 3);
    assert_eq!(fs::read(dir.path().join(FEATURES_FILE)).unwrap().len(), 16 + 6 * 2 * 4);
    assert_eq!(fs::read(dir.path().join(LABELS_FILE)).unwrap(), [0u32, 0, 1, 1, 2, 0].iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<_>>());
}

#[test]
fn manifest_checksums_match_an_independent_fnv() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&hand_bundle(), dir.path()).unwrap();
    let m: BundleManifest = serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(m.checksums.len(), 4);
    for (name, sum) in &m.checksums {
        assert_eq!(*sum, fnv_reference(&fs::read(dir.path().join(name)).unwrap()), "{name}");
    }
    assert_eq!(fnv_reference(b"foobar"), "85944171f73967e8");
}

#[test]
fn saves_are_byte_identical_and_a_float_edit_touches_four_bytes() {
    let b = generate_synthetic(&SynthSpec {
        samples_per_class: 10,
        ..SynthSpec::default()
    })
    .unwrap();
    let (d1, d2, d3) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_bundle(&b, d1.path()).unwrap();
    save_bundle(&b, d2.path()).unwrap();
    assert_eq!(dir_bytes(d1.path()), dir_bytes(d2.path()));

    let mut edited = b.clone();
    let v = edited.features.get(3, 7);
    edited.features.set(3, 7, v + 0.5);
    save_bundle(&edited, d3.path()).unwrap();
    let old = fs::read(d1.path().join(FEATURES_FILE)).unwrap();
    let new = fs::read(d3.path().join(FEATURES_FILE)).unwrap();
    let changed: Vec<usize> = (0..old.len()).filter(|&i| old[i] != new[i]).collect();
    assert!(!changed.is_empty() && changed.len() <= 4);
    let start = 16 + 4 * (3 * b.dim_v() + 7);
    assert!(changed.iter().all(|&i| (start..start + 4).contains(&i)), "{changed:?}");
}

#[test]
fn same_seed_gives_identical_bundle_bytes() {
    let spec = SynthSpec {
        seed: 7,
        samples_per_class: 20,
        ..SynthSpec::default()
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_bundle(&generate_synthetic(&spec).unwrap(), d1.path()).unwrap();
    save_bundle(&generate_synthetic(&spec).unwrap(), d2.path()).unwrap();
    assert_eq!(dir_bytes(d1.path()), dir_bytes(d2.path()));
    let other = SynthSpec { seed: 8, ..spec };
    let d3 = tempfile::tempdir().unwrap();
    save_bundle(&generate_synthetic(&other).unwrap(), d3.path()).unwrap();
    assert_ne!(dir_bytes(d1.path()), dir_bytes(d3.path()));
}

#[test]
fn truncated_features_report_the_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&hand_bundle(), dir.path()).unwrap();
    let path = dir.path().join(FEATURES_FILE);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 6]).unwrap();
    match load_bundle(dir.path()) {
        Err(Error::Corrupt { path: p, offset, .. }) => {
            assert_eq!(p, path);
            assert_eq!(offset as usize, bytes.len() - 6);
        }
        other => panic!("expected corrupt-file error, got {other:?}"),
    }
    fs::write(&path, &bytes[..10]).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::Corrupt { offset: 10, .. })));
}

#[test]
fn flipped_payload_bit_fails_the_checksum() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&hand_bundle(), dir.path()).unwrap();
    let path = dir.path().join(FEATURES_FILE);
    let mut bytes = fs::read(&path).unwrap();
    bytes[20] ^= 1;
    fs::write(&path, &bytes).unwrap();
    let err = load_bundle(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Corrupt { .. }), "{err}");
    assert!(err.to_string().contains("checksum"));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn bad_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&hand_bundle(), dir.path()).unwrap();
    let path = dir.path().join(FEATURES_FILE);
    let mut bytes = fs::read(&path).unwrap();
    bytes[4] = 2;
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::Corrupt { offset: 4, .. })));
}

#[test]
fn unseen_rows_in_training_are_rejected() {
    let mut b = hand_bundle();
    b.splits.test_unseen_idx.clear();
    b.splits.train_idx.push(4);
    let err = b.validate().unwrap_err();
    assert!(err.to_string().contains("train_idx"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    assert!(save_bundle(&b, dir.path()).is_err());
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&hand_bundle(), dir.path()).unwrap();
    fs::remove_file(dir.path().join(LABELS_FILE)).unwrap();
    let err = load_bundle(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 5);
}

#[test]
fn synthetic_bundles_pass_the_loader_without_warnings() {
    for seed in 0..3 {
        let b = generate_synthetic(&SynthSpec {
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&b, dir.path()).unwrap();
        let (back, warnings) = load_bundle_with_warnings(dir.path()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, b);
    }
}

#[test]
fn minimal_synthetic_bundle_is_legal() {
    let b = generate_synthetic(&SynthSpec {
        n_seen: 1,
        n_unseen: 1,
        samples_per_class: 1,
        ..SynthSpec::default()
    })
    .unwrap();
    assert_eq!(b.labels.len(), 2);
    assert!(b.splits.val_unseen_classes.is_empty());
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&b, dir.path()).unwrap();
    let (back, _) = load_bundle_with_warnings(dir.path()).unwrap();
    assert_eq!(back, b);
}

#[test]
fn wide_separation_is_solved_by_raw_feature_nearest_neighbor() {
    for seed in 0..3 {
        let b = generate_synthetic(&SynthSpec {
            separation: 10.0,
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        let n = b.labels.len();
        let classes: Vec<u32> = (0..b.num_classes() as u32).collect();
        let preds: Vec<u32> = (0..n)
            .map(|i| {
                let xi = b.features.row(i);
                let nearest = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d: f64 = xi.iter().zip(b.features.row(j)).map(|(p, q)| (p - q) * (p - q)).sum();
                        (d, j)
                    })
                    .min_by(|p, q| p.0.total_cmp(&q.0))
                    .unwrap()
                    .1;
                b.labels[nearest]
            })
            .collect();
        let acc = gatingae::metrics::per_class_top1(&preds, &b.labels, &classes).unwrap();
        assert!(acc >= 0.99, "seed {seed}: leave-one-out 1-NN accuracy {acc}");
    }
}

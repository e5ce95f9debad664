use std::collections::BTreeMap;
use std::path::PathBuf;

use skid_core::datakit::*;
use skid_core::{Plane, SkidError};

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_train: 10,
        n_valid: 4,
        n_test: 0,
        frame_side: 192,
        min_frames: 3,
        max_frames: 5,
        planes: vec![Plane::Sagittal, Plane::Axial],
        seed,
        ..SyntheticSpec::default()
    }
}

#[test]
fn mrnet_scaled_counts() {
    let spec = SyntheticSpec::mrnet_scaled(0.1);
    assert_eq!(spec.n_train, 113);
    // 1130·0.1 clips, each label count rounded from the training proportions
    let expect: Vec<usize> = MRNET_TRAIN_POSITIVES
        .iter()
        .map(|&p| (113.0 * p as f64 / 1130.0).round() as usize)
        .collect();
    assert_eq!(expect, vec![92, 21, 40]);
    assert_eq!(positive_counts(113, spec.prevalence).to_vec(), expect);
    let labels = assign_labels(113, spec.prevalence, &mut skid_core::rng::seeded(3));
    for j in 0..3 {
        assert_eq!(labels.iter().filter(|l| l[j] == 1).count(), expect[j]);
    }
    assert!(labels.iter().all(|l| l[0] == 1 || (l[1] == 0 && l[2] == 0)));
}

fn tree_bytes(root: &std::path::Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn synthetic_generation_is_byte_deterministic_and_loads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = generate_synthetic_dataset(&small_spec(5), a.path()).unwrap();
    generate_synthetic_dataset(&small_spec(5), b.path()).unwrap();
    assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));
    assert_eq!(sa.splits.len(), 2);

    let m = DatasetManifest::load(a.path(), Split::Train, LabelSchema::Mrnet3, &[Plane::Sagittal, Plane::Axial]).unwrap();
    assert_eq!(m.len(), 10);
    let v = m.load_volume(0, Plane::Axial).unwrap();
    assert_eq!(v.height(), 192);
    assert!((3..=5).contains(&v.n_frames()));
    assert_eq!(v.labels, m.entries[0].labels);
    let f = v.frame(0).unwrap();
    assert!(f.pixels().data().iter().all(|x| (0.0..=1.0).contains(x)));

    // fail fast on a damaged volume
    let p = m.entries[3].path(Plane::Sagittal).unwrap().to_path_buf();
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() - 10]).unwrap();
    match DatasetManifest::load(a.path(), Split::Train, LabelSchema::Mrnet3, &[Plane::Sagittal]) {
        Err(SkidError::Data(msg)) => assert!(msg.contains(&m.entries[3].clip_id)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn negative_clip_has_no_motif() {
    let spec = small_spec(1);
    let mut rng = skid_core::rng::seeded(9);
    let neg = synth_clip(&spec, "n", Plane::Sagittal, [0, 0, 0], &mut rng).unwrap();
    assert_eq!(neg.labels, vec![0, 0, 0]);
    // same draws with a motif differ only in the central frames
    let spec0 = SyntheticSpec { noise: 0.0, ..spec };
    let a = synth_clip(&spec0, "a", Plane::Sagittal, [0, 0, 0], &mut skid_core::rng::seeded(4)).unwrap();
    let b = synth_clip(&spec0, "b", Plane::Sagittal, [1, 0, 0], &mut skid_core::rng::seeded(4)).unwrap();
    assert_eq!(a.n_frames(), b.n_frames());
    let f = a.n_frames();
    let first_a = a.raster(0).unwrap();
    let first_b = b.raster(0).unwrap();
    assert_eq!(first_a, first_b);
    let mid_a = a.raster(f / 2).unwrap();
    let mid_b = b.raster(f / 2).unwrap();
    assert!(mid_b.mean() > mid_a.mean());
}

fn fake_manifest(labels: Vec<Vec<u8>>, schema: LabelSchema) -> DatasetManifest {
    DatasetManifest {
        root: PathBuf::from("/nonexistent"),
        split: Split::Train,
        schema,
        planes: vec![Plane::Sagittal],
        entries: labels
            .into_iter()
            .enumerate()
            .map(|(i, labels)| ClipEntry {
                clip_id: format!("c{i}"),
                labels,
                paths: [(Plane::Sagittal, PathBuf::from(format!("/x/c{i}.skidvol")))].into_iter().collect(),
            })
            .collect(),
    }
}

fn mrnet_like(n: usize, seed: u64) -> DatasetManifest {
    let spec = SyntheticSpec::default();
    let labels = assign_labels(n, spec.prevalence, &mut skid_core::rng::seeded(seed));
    fake_manifest(labels.into_iter().map(|l| l.to_vec()).collect(), LabelSchema::Mrnet3)
}

#[test]
fn label_efficiency_subsets() {
    let m = mrnet_like(1130, 1);
    let full = subset_for_label_efficiency(&m, 1.0, 0).unwrap();
    assert_eq!(full, m);
    for (frac, n) in [(0.1, 113), (0.5, 565)] {
        let s = subset_for_label_efficiency(&m, frac, 7).unwrap();
        assert_eq!(s.len(), n);
        assert!(s.positives().iter().all(|&p| p > 0));
        assert_eq!(s, subset_for_label_efficiency(&m, frac, 7).unwrap());
        let ids: std::collections::HashSet<_> = s.entries.iter().map(|e| &e.clip_id).collect();
        assert_eq!(ids.len(), n);
    }
    let tiny = fake_manifest(
        (0..100).map(|i| vec![u8::from(i == 0), 0, 0]).collect(),
        LabelSchema::Mrnet3,
    );
    assert!(matches!(subset_for_label_efficiency(&tiny, 0.1, 0), Err(SkidError::InvalidArgument(_))));
    assert!(subset_for_label_efficiency(&m, 0.0, 0).is_err());
}

#[test]
fn oversampling_balances_classes() {
    let m = fake_manifest((0..100).map(|i| vec![u8::from(i < 10)]).collect(), LabelSchema::KneemriBinary);
    let o = oversample_minority(&m).unwrap();
    assert_eq!(o.positives(), vec![90]);
    assert_eq!(o.len(), 180);
    let orig: std::collections::HashSet<_> = m.entries.iter().map(|e| e.paths.clone()).collect();
    assert!(o.entries.iter().all(|e| orig.contains(&e.paths)));

    let bal = fake_manifest((0..10).map(|i| vec![u8::from(i % 2 == 0)]).collect(), LabelSchema::KneemriBinary);
    assert_eq!(oversample_minority(&bal).unwrap(), bal);
    let one = fake_manifest(vec![vec![1]; 5], LabelSchema::KneemriBinary);
    assert!(oversample_minority(&one).is_err());
}

#[test]
fn label_csv_schemas() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("labels.csv");
    std::fs::write(&p, "clip_id,ligament_state\na,0\nb,1\nc,2\n").unwrap();
    let bin = read_labels(&p, LabelSchema::KneemriBinary).unwrap();
    assert_eq!(bin.iter().map(|r| r.1[0]).collect::<Vec<_>>(), vec![0, 0, 1]);
    let ter = read_labels(&p, LabelSchema::KneemriTernary).unwrap();
    assert_eq!(ter.iter().map(|r| r.1[0]).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(matches!(read_labels(&p, LabelSchema::Mrnet3), Err(SkidError::Parse { line: 1, .. })));
    std::fs::write(&p, "clip_id,abnormal,acl,meniscus\na,1,0,1\nb,1,2,0\n").unwrap();
    assert!(matches!(read_labels(&p, LabelSchema::Mrnet3), Err(SkidError::Parse { line: 3, .. })));
}

#[test]
fn import_png_directory() {
    let d = tempfile::tempdir().unwrap();
    for i in 0..3 {
        let img = image::GrayImage::from_fn(200, 200, |x, y| image::Luma([((x + y + i) % 256) as u8]));
        img.save(d.path().join(format!("f{i:02}.png"))).unwrap();
    }
    let v = import_image_dir(d.path(), "imp", Plane::Coronal, IMPORT_SIDE).unwrap();
    assert_eq!((v.n_frames(), v.height(), v.width()), (3, 256, 256));
    let small = tempfile::tempdir().unwrap();
    image::GrayImage::new(100, 100).save(small.path().join("a.png")).unwrap();
    assert!(import_image_dir(small.path(), "x", Plane::Axial, 256).is_err());
}

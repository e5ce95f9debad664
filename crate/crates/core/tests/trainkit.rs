use skid_autograd::{Graph, ParamStore, RmsProp, Tensor};
use skid_core::arrangements::ArrangementSet;
use skid_core::datakit::{synth_clip, ClipVolume, SyntheticSpec};
use skid_core::framekit::{AugmentationSpec, JigsawPipeline};
use skid_core::rng::{seeded, stream_rng};
use skid_core::skidnet::{copy_params, DownstreamConfig, DownstreamModel, PretextModel, SkidConfig};
use skid_core::trainkit::*;
use skid_core::{Plane, SkidError};

fn tiny_clips(n: usize, seed: u64) -> Vec<ClipVolume> {
    let spec = SyntheticSpec {
        frame_side: 192,
        min_frames: 3,
        max_frames: 5,
        ..SyntheticSpec::mrnet_scaled(0.1)
    };
    (0..n)
        .map(|i| {
            let labels = [u8::from(i % 2 == 0), u8::from(i % 3 == 0), u8::from(i % 4 == 1)];
            synth_clip(&spec, &format!("{i:04}"), Plane::Sagittal, labels, &mut stream_rng(seed, i as u64)).unwrap()
        })
        .collect()
}

fn snapshot(store: &ParamStore, prefix: &str) -> Vec<(String, Tensor)> {
    store
        .iter()
        .filter(|(_, p)| p.name.starts_with(prefix))
        .map(|(_, p)| (p.name.clone(), p.value().clone()))
        .collect()
}

#[test]
fn weighted_bce_examples() {
    let ln2 = 2f64.ln();
    let v = weighted_bce(&[0.5, 0.5, 0.5], &[1, 0, 1], &[1.0, 1.0, 1.0]).unwrap();
    assert!((v - ln2).abs() < 1e-15);
    let v = weighted_bce(&[1.0, 0.0, 1.0], &[1, 0, 1], &[3.0, 3.0, 3.0]).unwrap();
    assert!(v >= 0.0 && v < 1e-6, "{v}");
    // hand expansion
    let p = [0.8, 0.3, 0.6];
    let v = weighted_bce(&p, &[1, 0, 0], &[2.0, 1.0, 1.0]).unwrap();
    let want = (2.0 * -(0.8f64).ln() - (0.7f64).ln() - (0.4f64).ln()) / 3.0;
    assert!((v - want).abs() < 1e-14);
    assert!(weighted_bce(&[0.5], &[1, 0], &[1.0]).is_err());
    assert!(weighted_bce(&[0.0], &[1], &[1.0]).unwrap().is_finite());
}

#[test]
fn default_weights_are_negative_over_positive() {
    let l: Vec<&[u8]> = vec![&[1, 0, 1], &[0, 0, 1], &[0, 0, 1], &[0, 1, 1]];
    assert_eq!(default_pos_weights(&l, 3), vec![3.0, 3.0, 1.0]);
}

#[test]
fn lr_schedule_closed_form() {
    for e in 0..40 {
        let want = 1e-4 * 0.95f64.powi(e as i32);
        assert!((lr_at(1e-4, 0.95, e) - want).abs() <= 1e-20);
    }
    let c = PretextTrainConfig::default();
    assert_eq!(c.lr_at(0), 1e-4);
    assert!(PretextTrainConfig { lr_decay: 1.5, ..c.clone() }.validate().is_err());
    assert!(PretextTrainConfig { batch_size: 0, ..c }.validate().is_err());
    let d = DownstreamTrainConfig::default();
    assert_eq!((d.lr, d.frames_per_clip, d.max_epochs), (1e-5, 16, 20));
    assert!(DownstreamTrainConfig { pos_weights: Some(vec![1.0, -1.0, 1.0]), ..d }.validate().is_err());
}

#[test]
fn config_json_fills_defaults() {
    let c: PretextTrainConfig = serde_json::from_str(r#"{"lr": 0.001, "max_epochs": 3}"#).unwrap();
    assert_eq!((c.lr, c.max_epochs, c.batch_size), (1e-3, 3, 16));
}

#[test]
fn rmsprop_skips_frozen_parameters() {
    let mut store = ParamStore::new();
    let a = store.add("a", Tensor::full(&[3], 1.0));
    let b = store.add("b", Tensor::full(&[3], 1.0));
    store.set_frozen(b, true);
    let mut g = Graph::new();
    let va = g.param(&store, a).unwrap();
    let vb = g.param(&store, b).unwrap();
    let s = g.add(va, vb).unwrap();
    let loss = g.sum(s);
    let grads = g.backward(loss).unwrap();
    let mut opt = RmsProp::new(0.1, 0.9, 1e-7);
    opt.step(&mut store, &grads).unwrap();
    assert_eq!(store.value(b).unwrap().data(), &[1.0; 3]);
    // first step moves by lr/sqrt(1-rho)
    let want = 1.0 - 0.1 / (0.1f64.sqrt() + 1e-7);
    for v in store.value(a).unwrap().data() {
        assert!((v - want).abs() < 1e-12);
    }
}

fn pretext_setup(seed: u64) -> (PretextModel, ParamStore, JigsawPipeline) {
    let aset = ArrangementSet::generate(9, 4, 11).unwrap();
    let pipe = JigsawPipeline::new(aset, 9, AugmentationSpec::default()).unwrap();
    let cfg = SkidConfig::miniature().with_classes(4);
    let mut store = ParamStore::new();
    let model = PretextModel::build(&cfg, &mut store, &mut seeded(seed)).unwrap();
    (model, store, pipe)
}

#[test]
fn pretext_epoch_is_deterministic_and_logged() {
    let train = tiny_clips(6, 1);
    let valid = tiny_clips(3, 2);
    let cfg = PretextTrainConfig {
        lr: 1e-3,
        batch_size: 4,
        max_epochs: 2,
        seed: 9,
        ..Default::default()
    };
    let (m1, mut s1, pipe) = pretext_setup(5);
    let (m2, mut s2, _) = pretext_setup(5);
    let l1 = train_pretext(&train, &valid, &pipe, &m1, &mut s1, &cfg).unwrap();
    let l2 = train_pretext(&train, &valid, &pipe, &m2, &mut s2, &cfg).unwrap();
    assert_eq!(l1.epochs[0].train_loss, l2.epochs[0].train_loss);
    assert_eq!(l1.epochs[1].val_accuracy, l2.epochs[1].val_accuracy);
    assert_eq!(snapshot(&s1, ""), snapshot(&s2, ""));
    assert_eq!(l1.epochs.len(), 2);
    assert_eq!(l1.epochs[1].lr, lr_at(1e-3, 0.95, 1));
    assert!(l1.best_epoch.is_some());

    let d = tempfile::tempdir().unwrap();
    l1.save(d.path(), "pretext").unwrap();
    let csv = std::fs::read_to_string(d.path().join("pretext.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let back: TrainLog = serde_json::from_slice(&std::fs::read(d.path().join("pretext.json")).unwrap()).unwrap();
    assert_eq!(back.epochs.len(), 2);

    // head width must match the arrangement count
    let (m3, mut s3, _) = pretext_setup(5);
    let other = JigsawPipeline::new(ArrangementSet::generate(9, 5, 1).unwrap(), 9, AugmentationSpec::default()).unwrap();
    assert!(train_pretext(&train, &valid, &other, &m3, &mut s3, &cfg).is_err());
}

#[test]
fn non_finite_loss_aborts_with_diagnostic() {
    let train = tiny_clips(4, 3);
    let (model, mut store, pipe) = pretext_setup(1);
    let id = store.find("head.fc2.b").expect("head bias");
    store.value_mut(id).unwrap().data_mut()[0] = f64::NAN;
    let d = tempfile::tempdir().unwrap();
    let cfg = PretextTrainConfig {
        batch_size: 2,
        max_epochs: 1,
        diagnostic_dir: Some(d.path().to_path_buf()),
        ..Default::default()
    };
    match train_pretext(&train, &[], &pipe, &model, &mut store, &cfg) {
        Err(SkidError::NonFinite { diagnostic, .. }) => assert!(diagnostic.unwrap().exists()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn downstream_training_freezes_encoder() {
    let train = tiny_clips(6, 4);
    let valid = tiny_clips(4, 5);
    let skid = SkidConfig::miniature();
    let (_, pstore, _) = pretext_setup(2);
    let mut store = ParamStore::new();
    let model = DownstreamModel::build(&skid, &DownstreamConfig::miniature(), &mut store, &mut seeded(3)).unwrap();
    copy_params(&mut store, &pstore, "enc.").unwrap();
    assert_eq!(snapshot(&store, "enc."), snapshot(&pstore, "enc."));

    let enc_before = snapshot(&store, "enc.");
    let head_before = snapshot(&store, "clf.");
    let cfg = DownstreamTrainConfig {
        lr: 1e-3,
        max_epochs: 2,
        frames_per_clip: 4,
        eval_frames: 4,
        eval_repeats: 2,
        ..Default::default()
    };
    let log = train_downstream(&train, &valid, &model, &mut store, &cfg).unwrap();
    assert_eq!(log.epochs.len(), 2);
    assert_eq!(log.epochs[0].val_auc.len(), 3);
    assert!(log.config["resolved_pos_weights"].is_array());
    assert_eq!(snapshot(&store, "enc."), enc_before);
    assert_ne!(snapshot(&store, "clf."), head_before);

    // unfreezing the encoder is refused
    model.encoder().set_frozen(&mut store, false);
    assert!(matches!(
        train_downstream(&train, &valid, &model, &mut store, &cfg),
        Err(SkidError::InvalidArgument(_))
    ));
}

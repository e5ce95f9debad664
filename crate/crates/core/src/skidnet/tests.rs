use rand::Rng;
use skid_autograd::{Graph, ParamStore, Tensor};

use super::*;
use crate::framekit::Raster;
use crate::rng::seeded;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = seeded(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn skip_scale_zero_is_identity() {
    let mut store = ParamStore::new();
    let mut rng = seeded(1);
    let mut blk = SkipBlock::declare(&mut store, &mut rng, "s", 4, 3, 0.0);
    let x = random_tensor(&[2, 4, 6, 6], 2);
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = blk.forward(&mut g, &store, xv).unwrap();
    assert_eq!(g.value(y).data(), x.data());

    // affine in the scale
    let mut out = Vec::new();
    for s in [0.0, 0.25, 0.5] {
        blk.set_scale(s);
        let mut g = Graph::new();
        let xv = g.input(x.clone());
        let y = blk.forward(&mut g, &store, xv).unwrap();
        out.push(g.value(y).clone());
    }
    for i in 0..x.numel() {
        let mid = out[1].data()[i];
        let pred = 0.5 * (out[0].data()[i] + out[2].data()[i]);
        assert!((mid - pred).abs() < 1e-12);
    }
}

#[test]
fn skip_zero_weights_is_identity() {
    let mut store = ParamStore::new();
    let mut rng = seeded(3);
    let blk = SkipBlock::declare(&mut store, &mut rng, "s", 3, 5, 0.25);
    for id in store.ids().collect::<Vec<_>>() {
        let shape = store.param(id).shape().to_vec();
        store.set_value(id, Tensor::zeros(&shape)).unwrap();
    }
    let x = random_tensor(&[1, 3, 4, 4], 4);
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = blk.forward(&mut g, &store, xv).unwrap();
    assert_eq!(g.value(y).data(), x.data());
}

#[test]
fn dimred_lower_half_is_block_mean() {
    let (c, side) = (3, 6);
    let mut store = ParamStore::new();
    let mut rng = seeded(5);
    let blk = DimRedBlock::declare(&mut store, &mut rng, "d", c, 2 * c).unwrap();
    for id in store.ids().collect::<Vec<_>>() {
        let p = store.param(id);
        let shape = p.shape().to_vec();
        let mut t = Tensor::zeros(&shape);
        if p.name == "d.low.w" {
            for k in 0..c {
                t.data_mut()[k * c + k] = 1.0;
            }
        }
        store.set_value(id, t).unwrap();
    }
    let mut r = seeded(6);
    let x = Tensor::from_vec(
        &[1, c, side, side],
        (0..c * side * side).map(|_| r.random_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = blk.forward(&mut g, &store, xv).unwrap();
    let yv = g.value(y);
    assert_eq!(yv.shape(), &[1, 2 * c, side / 2, side / 2]);
    let h = side / 2;
    for ch in 0..c {
        for i in 0..h {
            for j in 0..h {
                let at = |yy: usize, xx: usize| x.data()[ch * side * side + yy * side + xx];
                let mean = (at(2 * i, 2 * j) + at(2 * i + 1, 2 * j) + at(2 * i, 2 * j + 1) + at(2 * i + 1, 2 * j + 1)) / 4.0;
                let upper = yv.data()[ch * h * h + i * h + j];
                let lower = yv.data()[(c + ch) * h * h + i * h + j];
                assert_eq!(upper, 0.0);
                assert!((lower - mean).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dimred_rejects_odd_input() {
    let mut store = ParamStore::new();
    let blk = DimRedBlock::declare(&mut store, &mut seeded(0), "enc.dimred1", 2, 4).unwrap();
    let mut g = Graph::new();
    let x = g.input(Tensor::zeros(&[1, 2, 5, 5]));
    match blk.forward(&mut g, &store, x) {
        Err(crate::SkidError::Construction { block, .. }) => assert_eq!(block, "enc.dimred1"),
        other => panic!("expected construction error, got {other:?}"),
    }
}

#[test]
fn validate_names_offending_block() {
    let mut cfg = SkidConfig::miniature();
    cfg.skip2_out += 1;
    match cfg.validate() {
        Err(crate::SkidError::Construction { block, .. }) => assert_eq!(block, "skip2"),
        other => panic!("{other:?}"),
    }
    let mut cfg = SkidConfig::miniature();
    cfg.dimred2_out = 63;
    match cfg.validate() {
        Err(crate::SkidError::Construction { block, .. }) => assert_eq!(block, "dimred2"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn v3_shape_ladder() {
    let ladder = SkidConfig::v3().shape_ladder().unwrap();
    let get = |b: BlockId| ladder.iter().find(|(id, _)| *id == b).unwrap().1;
    assert_eq!(get(BlockId::Concat), [16, 16, 2304]);
    assert_eq!(get(BlockId::Trunk), [16, 16, 1024]);
    assert_eq!(get(BlockId::DimRed1), [8, 8, 2048]);
    assert_eq!(get(BlockId::DimRed2), [4, 4, 4096]);
    let nb = SkidConfig::noblocks().shape_ladder().unwrap();
    assert_eq!(nb.last().unwrap().1, [4, 4, 1024]);
}

fn unit_patches(b: usize, seed: u64) -> Vec<Vec<Raster>> {
    let mut rng = seeded(seed);
    (0..b)
        .map(|_| {
            (0..9)
                .map(|_| Raster::from_vec(64, 64, (0..4096).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn miniature_forward_matches_ladder() {
    let cfg = SkidConfig::miniature();
    let mut store = ParamStore::new();
    let model = PretextModel::build(&cfg, &mut store, &mut seeded(7)).unwrap();
    let samples = unit_patches(2, 8);
    let mut g = Graph::new();
    let inputs: Vec<_> = patch_batch(&samples, 9).unwrap().into_iter().map(|t| g.input(t)).collect();
    let (logits, taps) = model.forward(&mut g, &store, &inputs).unwrap();
    assert_eq!(g.shape(logits), &[2, cfg.n_classes]);
    for (id, [h, w, c]) in cfg.shape_ladder().unwrap() {
        assert_eq!(g.shape(taps.get(id)), &[2, c, h, w], "{id}");
    }
    assert_eq!(store.count(), count_params(&cfg).unwrap());
}

#[test]
fn downstream_freezes_encoder() {
    let skid = SkidConfig::miniature();
    for head in [HeadKind::ConvLstm, HeadKind::Cnn3d] {
        let dcfg = DownstreamConfig::miniature().with_head(head);
        let mut store = ParamStore::new();
        let model = DownstreamModel::build(&skid, &dcfg, &mut store, &mut seeded(9)).unwrap();
        let head_count: usize = model.head_param_ids().iter().map(|&id| store.param(id).numel()).sum();
        assert_eq!(store.trainable_count(), head_count);
        let c = skid.feature_channels();
        let feats: Vec<Tensor> = (0..4).map(|i| random_tensor(&[c, 4, 4], 20 + i)).collect();
        let clips = vec![feats.iter().collect::<Vec<_>>(), feats.iter().rev().collect()];
        let p = model.predict_features(&store, &clips).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn downstream_channel_mismatch_is_construction_error() {
    let dcfg = DownstreamConfig {
        expected_feature_channels: Some(4096),
        ..DownstreamConfig::miniature()
    };
    let r = DownstreamModel::build(&SkidConfig::miniature(), &dcfg, &mut ParamStore::new(), &mut seeded(0));
    assert!(matches!(r, Err(crate::SkidError::Construction { .. })));
}

#[test]
fn checkpoint_round_trip_and_truncation() {
    let cfg = SkidConfig::miniature();
    let mut store = ParamStore::new();
    PretextModel::build(&cfg, &mut store, &mut seeded(11)).unwrap();
    let ck = Checkpoint::new(CheckpointMeta::new(ModelKind::Pretext, cfg.clone()), store.clone());
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.meta, ck.meta);
    for ((_, a), (_, b)) in store.iter().zip(back.params.iter()) {
        assert_eq!(a.name, b.name);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.value()), bits(b.value()));
    }
    match Checkpoint::from_bytes(&bytes[..bytes.len() - 3]) {
        Err(crate::SkidError::Format { offset, .. }) => assert!(offset > 20),
        other => panic!("{other:?}"),
    }
    assert!(matches!(Checkpoint::from_bytes(b"NOTACKPT"), Err(crate::SkidError::Format { offset: 0, .. })));
}


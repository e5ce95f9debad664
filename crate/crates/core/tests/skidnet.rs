mod common;

use common::*;
use proptest::prelude::*;
use skid_core::skidnet::*;

#[test]
fn published_variant_counts_match_the_audit() {
    for (cfg, expected) in [
        (SkidConfig::v1(), 108_743_400),
        (SkidConfig::v2(), 170_350_312),
        (SkidConfig::v3(), 217_537_768),
    ] {
        assert_eq!(audit_pretext(&cfg), expected, "{:?}", cfg.variant);
        assert_eq!(count_params(&cfg).unwrap(), expected, "{:?}", cfg.variant);
    }
    let v3 = count_params(&SkidConfig::v3()).unwrap() as f64;
    assert!((v3 / 217.68e6 - 1.0).abs() <= 0.02);
    assert!(count_params(&SkidConfig::noblocks()).unwrap() < v3 as usize);
}

#[test]
fn downstream_trainable_count() {
    let d = DownstreamConfig::default();
    let (trainable, total) = count_downstream_params(&SkidConfig::v3(), &d).unwrap();
    // 4·(4096+512)·512·9 + 4·(512+512)·512·9 plus gate biases and the 3-way classifier
    assert_eq!(trainable, 103_814_659);
    assert_eq!(trainable, audit_head(&SkidConfig::v3(), &d));
    assert_eq!(total, trainable + audit_encoder(&SkidConfig::v3()));
    assert!((trainable as f64 / 103e6 - 1.0).abs() <= 0.05);
    let cnn = d.clone().with_head(HeadKind::Cnn3d);
    assert_eq!(count_downstream_params(&SkidConfig::v3(), &cnn).unwrap().0, audit_head(&SkidConfig::v3(), &cnn));
}

#[test]
fn v3_ladder() {
    let ladder = SkidConfig::v3().shape_ladder().unwrap();
    let shapes: Vec<[usize; 3]> = ladder.iter().map(|(_, s)| *s).collect();
    assert_eq!(
        shapes,
        vec![[16, 16, 2304], [16, 16, 1024], [16, 16, 1024], [8, 8, 2048], [8, 8, 2048], [4, 4, 4096]]
    );
}

#[test]
fn pretext_gradients_match_finite_differences() {
    let samples = pretext_gradcheck(&tiny_config(), 20, 3);
    assert_eq!(samples.len(), 20);
    for s in &samples {
        assert!(s.rel_err() <= 1e-3, "{}: {} vs {}", s.name, s.analytic, s.numeric);
    }
}

fn small_config() -> impl Strategy<Value = SkidConfig> {
    (1usize..5, 1usize..5, 1usize..5, 1usize..5, 1usize..5, 1usize..4, 1usize..20, any::<bool>()).prop_map(
        |(f, one, s1, d1, s2, d2, k, blocks)| {
            let cfg = SkidConfig {
                variant: Variant::Custom,
                branch_block_filters: f,
                onebyone_filters: one,
                skip1_first_conv: s1,
                skip1_out: one,
                dimred1_out: 2 * d1,
                skip2_first_conv: s2,
                skip2_out: 2 * d1,
                dimred2_out: 2 * d2,
                fc_hidden: 3,
                n_classes: k,
                ..SkidConfig::miniature()
            };
            if blocks { cfg } else { cfg.without_blocks() }
        },
    )
}

proptest! {
    #[test]
    fn symbolic_count_equals_closed_form(cfg in small_config(), hd in 1usize..6, layers in 1usize..3, cnn in any::<bool>()) {
        prop_assert_eq!(count_params(&cfg).unwrap(), audit_pretext(&cfg));
        let mut d = DownstreamConfig { convlstm_channels: hd, convlstm_layers: layers, cnn3d_channels: hd, cnn3d_layers: layers, ..Default::default() };
        if cnn {
            d = d.with_head(HeadKind::Cnn3d);
        }
        let (trainable, total) = count_downstream_params(&cfg, &d).unwrap();
        prop_assert_eq!(trainable, audit_head(&cfg, &d));
        prop_assert_eq!(total, trainable + audit_encoder(&cfg));
    }
}

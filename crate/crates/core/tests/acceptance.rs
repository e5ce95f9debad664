//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers to run a subset:
//! `cargo test -p skid-core --test acceptance -- 2 7`.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use skid_autograd::exec::{self, Threading};
use skid_autograd::{Graph, ParamStore, Tensor};
use skid_core::arrangements::{Arrangement, ArrangementSet};
use skid_core::datakit::*;
use skid_core::evalkit::*;
use skid_core::framekit::*;
use skid_core::interpret::{gradcam_frame, saliency_mass, void_mask};
use skid_core::rng::{seeded, stream_rng};
use skid_core::skidnet::*;
use skid_core::trainkit::*;
use skid_core::Plane;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn out_dir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn architecture() -> Check {
    let cfg = SkidConfig::v3();
    let mut store = ParamStore::new();
    let model = PretextModel::build(&cfg, &mut store, &mut seeded(0)).map_err(err)?;
    let mut g = Graph::new();
    let xs: Vec<_> = (0..9).map(|_| g.input(Tensor::zeros(&[1, 1, PATCH_SIDE, PATCH_SIDE]))).collect();
    let (logits, taps) = model.forward(&mut g, &store, &xs).map_err(err)?;
    let expected = [
        (BlockId::Concat, [1, 2304, 16, 16]),
        (BlockId::Trunk, [1, 1024, 16, 16]),
        (BlockId::DimRed1, [1, 2048, 8, 8]),
        (BlockId::DimRed2, [1, 4096, 4, 4]),
    ];
    for (id, shape) in expected {
        ensure!(g.shape(taps.get(id)) == shape, "{id}: {:?} != {shape:?}", g.shape(taps.get(id)));
    }
    ensure!(g.shape(logits) == [1, 1000], "logits {:?}", g.shape(logits));
    let counted = store.count();
    drop(g);
    drop(store);

    let audit = common::audit_pretext(&cfg);
    ensure!(counted == audit, "store holds {counted}, audit says {audit}");
    let dev = counted as f64 / 217.68e6 - 1.0;
    ensure!(dev.abs() <= 0.02, "v3 count {counted} is {:.2}% off 217.68M", 100.0 * dev);

    let d = DownstreamConfig::default();
    let (trainable, total) = count_downstream_params(&cfg, &d).map_err(err)?;
    ensure!(trainable == common::audit_head(&cfg, &d), "head {trainable} disagrees with the audit");
    ensure!(total == trainable + common::audit_encoder(&cfg), "total {total} disagrees with the audit");
    let dev_h = trainable as f64 / 103e6 - 1.0;
    ensure!(dev_h.abs() <= 0.05, "head {trainable} is {:.2}% off 103M", 100.0 * dev_h);
    Ok(format!(
        "ladder 16x16x2304 -> 16x16x1024 -> 8x8x2048 -> 4x4x4096; v3 {counted} ({:+.2}%), head {trainable} ({:+.2}%)",
        100.0 * dev,
        100.0 * dev_h
    ))
}

fn prepfram() -> Check {
    let set = ArrangementSet::generate(9, 100, 3).map_err(err)?;
    let pipe = JigsawPipeline::new(set.clone(), 9, AugmentationSpec::disabled()).map_err(err)?;
    for i in 0..200u64 {
        let f = common::random_frame(192 + (i as usize * 7) % 120, i);
        let s = pipe.sample(&f, PipelineMode::Train, &mut stream_rng(1, i)).map_err(err)?;
        let back = set.get(s.label).ok_or("label out of range")?.inverse().apply(&s.patches).map_err(err)?;
        let cells = partition_frame(&f, 9).map_err(err)?;
        for (k, p) in back.iter().enumerate() {
            let (r, c) = s.origins[k];
            ensure!(*p == crop_at(&cells[k], r, c).map_err(err)?, "frame {i}: patch {k} differs after reassembly");
        }
    }
    let frames = [common::staircase(256, 9), common::staircase(200, 9)];
    let mut mismatches = 0;
    for i in 0..1000u64 {
        let s = pipe
            .sample(&frames[i as usize % 2], PipelineMode::Train, &mut stream_rng(2, i))
            .map_err(err)?;
        let mut perm = vec![0; 9];
        for (slot, p) in s.patches.iter().enumerate() {
            perm[(p.mean() * 9.0).round() as usize] = slot;
        }
        if set.label_of(&Arrangement::new(perm).map_err(err)?) != Some(s.label) {
            mismatches += 1;
        }
    }
    ensure!(mismatches == 0, "{mismatches} oracle mismatches in 1000 samples");
    Ok("200 bit-exact reassemblies, 0/1000 oracle mismatches".into())
}

fn ensemble() -> Check {
    let planes = Plane::ALL;
    let mut rng = seeded(11);
    let mut worst_sum: f64 = 0.0;
    for trial in 0..500 {
        let acc: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(0.01..0.99)).collect()).collect();
        let probs: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let records: Vec<PredictionRecord> = planes
            .iter()
            .zip(&probs)
            .map(|(&p, h)| PredictionRecord::new("c", p, h.clone(), vec![0; 3]).unwrap())
            .collect();
        let refs: Vec<&PredictionRecord> = records.iter().rev().collect();
        let w = compute_weights(&planes, &acc).map_err(err)?;
        let out = ensemble_predict(&refs, &w).map_err(err)?;
        for j in 0..3 {
            // brute force: clamped log-odds, normalized, weighted vote
            let raw: Vec<f64> = (0..3).map(|i| (acc[j][i] / (1.0 - acc[j][i])).ln().max(0.0)).collect();
            let total: f64 = raw.iter().sum();
            let wj: Vec<f64> = if total == 0.0 { vec![1.0 / 3.0; 3] } else { raw.iter().map(|r| r / total).collect() };
            let mut score = 0.0;
            for i in 0..3 {
                score += wj[i] * probs[i][j];
            }
            ensure!(out.scores[j] == score, "trial {trial}, class {j}: {} vs {score}", out.scores[j]);
            ensure!(out.bits[j] == u8::from(score >= 0.5), "trial {trial}, class {j}: bit differs");
            worst_sum = worst_sum.max((w.w[j].iter().sum::<f64>() - 1.0).abs());
        }
    }
    ensure!(worst_sum <= 1e-9, "weight row off by {worst_sum}");
    let records: Vec<PredictionRecord> = planes
        .iter()
        .zip([0.9, 0.6, 0.0])
        .map(|(&p, h)| PredictionRecord::new("b", p, vec![h], vec![1]).unwrap())
        .collect();
    let refs: Vec<&PredictionRecord> = records.iter().collect();
    let out = ensemble_predict(&refs, &EnsembleWeights::uniform(&planes, 1)).map_err(err)?;
    ensure!(out.bits == [1], "boundary case gave {:?} (score {})", out.bits, out.scores[0]);
    Ok(format!("500 exact matches, max |row sum - 1| = {worst_sum:.1e}, boundary score {} -> 1", out.scores[0]))
}

fn metrics() -> Check {
    let mut rng = seeded(12);
    let mut trials = 0;
    while trials < 1000 {
        let n = rng.random_range(2..=50);
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        let levels = rng.random_range(2..12);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let (mut num, mut pairs) = (0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                if y[i] == 1 && y[k] == 0 {
                    pairs += 1.0;
                    num += if s[i] > s[k] { 1.0 } else if s[i] == s[k] { 0.5 } else { 0.0 };
                }
            }
        }
        let a = auc(&s, &y, 0).map_err(err)?;
        ensure!(a == num / pairs, "trial {trials}: {a} vs {}", num / pairs);
        trials += 1;
    }
    let s: Vec<f64> = (0..40).map(|i| (i % 7) as f64 / 7.0).collect();
    let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
    let m = |idx: &[usize]| {
        let ss: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let yy: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        auc(&ss, &yy, 0)
    };
    let a = bootstrap_ci(40, m, 500, 0.05, 0.95, 9).map_err(err)?;
    let b = bootstrap_ci(40, m, 500, 0.05, 0.95, 9).map_err(err)?;
    exec::set_threading(Threading::Sequential);
    let c = bootstrap_ci(40, m, 500, 0.05, 0.95, 9);
    exec::set_threading(Threading::Parallel);
    ensure!(a == b && Ok(a) == c.map_err(err), "bootstrap differs between runs");
    let k = bootstrap_ci(40, |_: &[usize]| Ok(0.7), 200, 0.05, 0.95, 1).map_err(err)?;
    ensure!(k.lo == 0.7 && k.hi == 0.7 && k.point == 0.7, "constant metric gave {k:?}");
    Ok(format!("1000/1000 exact AUC matches; bootstrap [{:.3}, {:.3}] reproducible; constant -> point", a.lo, a.hi))
}

fn gradcheck() -> Check {
    let samples = common::pretext_gradcheck(&common::tiny_config(), 24, 5);
    ensure!(samples.len() >= 20, "only {} parameters with usable gradients", samples.len());
    let worst = samples.iter().max_by(|a, b| a.rel_err().total_cmp(&b.rel_err())).unwrap();
    ensure!(
        worst.rel_err() <= 1e-3,
        "{}: analytic {} numeric {} (rel {:.2e})",
        worst.name,
        worst.analytic,
        worst.numeric,
        worst.rel_err()
    );
    Ok(format!("{} parameters, max relative error {:.2e}", samples.len(), worst.rel_err()))
}

fn load_plane(root: &Path, split: Split) -> Result<Vec<ClipVolume>, String> {
    DatasetManifest::load(root, split, LabelSchema::Mrnet3, &[Plane::Sagittal])
        .and_then(|m| m.load_all(Plane::Sagittal))
        .map_err(err)
}

fn encoder_bits(store: &ParamStore) -> BTreeMap<String, Vec<u64>> {
    store
        .iter()
        .filter(|(_, p)| p.name.starts_with("enc."))
        .map(|(_, p)| (p.name.clone(), p.value().data().iter().map(|v| v.to_bits()).collect()))
        .collect()
}

fn learnability() -> Check {
    let root = out_dir("learnability");
    let spec = SyntheticSpec {
        n_valid: 40,
        n_test: 0,
        frame_side: 224,
        min_frames: 12,
        max_frames: 20,
        planes: vec![Plane::Sagittal],
        seed: 1,
        ..SyntheticSpec::mrnet_scaled(0.1)
    };
    generate_synthetic_dataset(&spec, &root).map_err(err)?;
    let train = load_plane(&root, Split::Train)?;
    let valid = load_plane(&root, Split::Valid)?;

    let cfg = SkidConfig::miniature().with_classes(10);
    let pipe = JigsawPipeline::new(ArrangementSet::generate(9, 10, 7).map_err(err)?, 9, AugmentationSpec::default())
        .map_err(err)?;
    let mut store = ParamStore::new();
    let model = PretextModel::build(&cfg, &mut store, &mut seeded(3)).map_err(err)?;
    let pcfg = PretextTrainConfig {
        lr: 1e-3,
        max_epochs: 30,
        val_samples_per_clip: 2,
        ..Default::default()
    };
    let plog = train_pretext(&train, &valid, &pipe, &model, &mut store, &pcfg).map_err(err)?;
    plog.save(&root, "pretext").map_err(err)?;
    let best = plog.best_epoch.ok_or("no best epoch")?;
    let val_acc = plog.epochs[best].val_accuracy.ok_or("no validation accuracy")?;

    let dcfg = DownstreamConfig::miniature();
    let mut ds = ParamStore::new();
    let dm = DownstreamModel::build(&cfg, &dcfg, &mut ds, &mut seeded(4)).map_err(err)?;
    copy_params(&mut ds, &store, "enc.").map_err(err)?;
    let before = encoder_bits(&ds);
    let tcfg = DownstreamTrainConfig {
        lr: 3e-4,
        max_epochs: 10,
        ..Default::default()
    };
    let dlog = train_downstream(&train, &valid, &dm, &mut ds, &tcfg).map_err(err)?;
    dlog.save(&root, "downstream").map_err(err)?;
    let frozen = encoder_bits(&ds) == before;

    let feats = encode_clips(&dm, &ds, &valid).map_err(err)?;
    let recs = predict_cached(&dm, &ds, &valid, &feats, EVAL_FRAMES, EVAL_REPEATS, 21).map_err(err)?;
    write_records(root.join("valid_sagittal.csv"), &recs).map_err(err)?;
    let mut aucs = Vec::new();
    for j in 0..3 {
        let s: Vec<f64> = recs.iter().map(|r| r.probs[j]).collect();
        let y: Vec<u8> = recs.iter().map(|r| r.labels[j]).collect();
        aucs.push(auc(&s, &y, j).ok());
    }
    let best_auc = aucs.iter().flatten().copied().fold(f64::NAN, f64::max);
    let detail = format!(
        "pretext val acc {val_acc:.3} (best epoch {}, {} run); downstream AUC {}; encoder {}",
        best + 1,
        plog.epochs.len(),
        aucs.iter()
            .zip(skid_core::LABEL_NAMES)
            .map(|(a, n)| format!("{n} {}", a.map_or("n/a".into(), |v| format!("{v:.3}"))))
            .collect::<Vec<_>>()
            .join(", "),
        if frozen { "bit-identical" } else { "CHANGED" }
    );
    ensure!(val_acc >= 0.5 && best_auc > 0.8 && frozen, "{detail}");
    Ok(detail)
}

fn frame_sampling() -> Check {
    let mut rng = seeded(13);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| raw_eval_draw(40, &mut rng)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    ensure!((mean - 20.0).abs() <= 0.1, "mean {mean}");
    ensure!((sd / 10.0 - 1.0).abs() <= 0.02, "sd {sd}");
    for nf in 1..=64 {
        for _ in 0..50 {
            let idx = sample_eval_frames(nf, EVAL_FRAMES, &mut rng);
            ensure!(idx.len() == EVAL_FRAMES, "N_F={nf}: {} indices", idx.len());
            ensure!(idx.windows(2).all(|w| w[0] <= w[1]), "N_F={nf}: unsorted {idx:?}");
            ensure!(idx.iter().all(|&i| i < nf), "N_F={nf}: out of range {idx:?}");
        }
    }
    Ok(format!("mean {mean:.4}, sd {sd:.4}; indices sorted and in range for N_F 1..=64"))
}

fn tiny_dataset(name: &str, seed: u64) -> Result<PathBuf, String> {
    let root = out_dir(name);
    let spec = SyntheticSpec {
        n_train: 24,
        n_valid: 12,
        n_test: 0,
        frame_side: 192,
        min_frames: 4,
        max_frames: 6,
        planes: vec![Plane::Sagittal],
        seed,
        ..SyntheticSpec::mrnet_scaled(0.02)
    };
    generate_synthetic_dataset(&spec, &root).map_err(err)?;
    Ok(root)
}

fn geo_harness() -> Check {
    let ts = enumerate_geo_transforms(192).map_err(err)?;
    let distinct: HashSet<String> = ts.iter().map(|t| format!("{:?}", (t.rot_deg, t.tx, t.ty, t.scale))).collect();
    ensure!(GEO_CLASSES == 54 && ts.len() == 54 && distinct.len() == 54, "{} transforms", ts.len());

    let root = tiny_dataset("geo", 2)?;
    let train = load_plane(&root, Split::Train)?;
    let valid = load_plane(&root, Split::Valid)?;
    let cfg = SkidConfig::miniature().with_classes(GEO_CLASSES);
    let mut store = ParamStore::new();
    let model = PretextModel::build(&cfg, &mut store, &mut seeded(5)).map_err(err)?;
    let tcfg = PretextTrainConfig {
        lr: 1e-3,
        max_epochs: 3,
        ..Default::default()
    };
    train_geo_baseline(&train, &valid, &model, &mut store, &tcfg).map_err(err)?;

    let mut pairs = Vec::new();
    for (i, clip) in valid.iter().enumerate().take(6) {
        let frame = clip.frame(clip.n_frames() / 2).map_err(err)?;
        // skip the identity; every other class leaves some void
        let t = &ts[1 + (i * 17) % 53];
        let moved = apply_geo_transform(&frame, t).map_err(err)?;
        for layer in [BlockId::Concat, BlockId::DimRed2] {
            let m = gradcam_frame(&model, &store, &moved, t.class_id, layer).map_err(err)?;
            let v = m.values.data();
            ensure!(v.iter().all(|&x| (0.0..=1.0).contains(&x)), "{layer}: map outside [0, 1]");
            let max = v.iter().copied().fold(0.0, f64::max);
            ensure!(m.all_zero || max == 1.0, "{layer}: max {max} without the all-zero flag");
            if layer == BlockId::DimRed2 {
                pairs.push((m, void_mask(192, t).map_err(err)?));
            }
        }
    }
    let r = saliency_mass(&pairs).map_err(err)?;
    let path = out_dir("geo_report").join("saliency_mass.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&r).map_err(err)?).map_err(err)?;
    Ok(format!(
        "54 classes; {} maps valid; void area {:.3}, void mass {:.3}, mean void {:.3} vs interior {:.3}",
        2 * pairs.len(),
        r.void_area_fraction,
        r.void_mass_fraction,
        r.mean_void,
        r.mean_interior
    ))
}

/// One pretext epoch then one downstream epoch; returns the validation report.
fn run_setting(
    name: &str,
    out: &Path,
    train: &[ClipVolume],
    valid: &[ClipVolume],
    k: usize,
    aug: AugmentationSpec,
) -> Result<MetricsReport, String> {
    let cfg = SkidConfig::miniature().with_classes(k);
    let pipe = JigsawPipeline::new(ArrangementSet::generate(9, k, 17).map_err(err)?, 9, aug).map_err(err)?;
    let mut store = ParamStore::new();
    let model = PretextModel::build(&cfg, &mut store, &mut seeded(6)).map_err(err)?;
    let pcfg = PretextTrainConfig {
        lr: 1e-3,
        max_epochs: 1,
        ..Default::default()
    };
    train_pretext(train, valid, &pipe, &model, &mut store, &pcfg)
        .map_err(err)?
        .save(out, &format!("pretext_{name}"))
        .map_err(err)?;
    let mut ds = ParamStore::new();
    let dm = DownstreamModel::build(&cfg, &DownstreamConfig::miniature(), &mut ds, &mut seeded(7)).map_err(err)?;
    copy_params(&mut ds, &store, "enc.").map_err(err)?;
    let dcfg = DownstreamTrainConfig {
        lr: 3e-4,
        max_epochs: 1,
        eval_repeats: 2,
        ..Default::default()
    };
    train_downstream(train, valid, &dm, &mut ds, &dcfg)
        .map_err(err)?
        .save(out, &format!("downstream_{name}"))
        .map_err(err)?;
    let feats = encode_clips(&dm, &ds, valid).map_err(err)?;
    let recs = predict_cached(&dm, &ds, valid, &feats, EVAL_FRAMES, 2, 3).map_err(err)?;
    records_report(name, &recs, 100, 8).map_err(err)
}

fn check_sweep(path: &Path, settings: usize) -> Result<(), String> {
    let text = std::fs::read_to_string(path).map_err(err)?;
    let mut lines = text.lines();
    ensure!(
        lines.next() == Some("setting,class,positives,auc,auc_lo,auc_hi,accuracy,sensitivity,specificity"),
        "{}: bad header",
        path.display()
    );
    let rows = lines.count();
    ensure!(rows == 3 * settings, "{}: {rows} rows for {settings} settings", path.display());
    Ok(())
}

fn ablations() -> Check {
    let mut rng = seeded(14);
    let labels = assign_labels(MRNET_TRAIN_CLIPS, SyntheticSpec::default().prevalence, &mut rng);
    let manifest = DatasetManifest {
        root: PathBuf::new(),
        split: Split::Train,
        schema: LabelSchema::Mrnet3,
        planes: vec![Plane::Sagittal],
        entries: labels
            .iter()
            .enumerate()
            .map(|(i, l)| ClipEntry {
                clip_id: format!("{i:04}"),
                labels: l.to_vec(),
                paths: BTreeMap::new(),
            })
            .collect(),
    };
    let sub = subset_for_label_efficiency(&manifest, 0.1, 3).map_err(err)?;
    ensure!(sub.len() == 113, "10% subset holds {} clips", sub.len());
    ensure!(sub.positives().iter().all(|&p| p > 0), "positives {:?}", sub.positives());
    let half = subset_for_label_efficiency(&manifest, 0.5, 3).map_err(err)?;
    ensure!(half.len() == 565, "50% subset holds {} clips", half.len());

    let root = tiny_dataset("ablation_data", 3)?;
    let out = out_dir("ablations");
    let train = load_plane(&root, Split::Train)?;
    let valid = load_plane(&root, Split::Valid)?;

    let mut by_k = Vec::new();
    for k in [500, 1000] {
        by_k.push((format!("k{k}"), run_setting(&format!("k{k}"), &out, &train, &valid, k, AugmentationSpec::default())?));
    }
    write_sweep_csv(out.join("class_count.csv"), &by_k).map_err(err)?;

    let full = AugmentationSpec::default();
    let toggles = [
        ("all", full.clone()),
        ("no_shift", AugmentationSpec { shift: false, ..full.clone() }),
        ("no_rotate", AugmentationSpec { rotate: false, ..full.clone() }),
        ("no_scale", AugmentationSpec { scale: false, ..full.clone() }),
        ("no_noise", AugmentationSpec { noise: false, ..full.clone() }),
        ("none", AugmentationSpec::disabled()),
    ];
    let mut by_aug = Vec::new();
    for (name, aug) in toggles {
        by_aug.push((name.to_string(), run_setting(name, &out, &train, &valid, 100, aug)?));
    }
    write_sweep_csv(out.join("augmentation.csv"), &by_aug).map_err(err)?;

    check_sweep(&out.join("class_count.csv"), 2)?;
    check_sweep(&out.join("augmentation.csv"), 6)?;
    Ok(format!(
        "1130 -> 113 clips at 10% (positives {:?}); K sweep and 6 augmentation toggles wrote {}",
        sub.positives(),
        out.display()
    ))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panic".into())
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(&str, fn() -> Check); 9] = [
        ("architecture fidelity", architecture),
        ("prepfram correctness", prepfram),
        ("ensemble oracle", ensemble),
        ("metrics oracle", metrics),
        ("gradient check", gradcheck),
        ("desk-scale learnability", learnability),
        ("frame-sampling statistics", frame_sampling),
        ("geometric baseline harness", geo_harness),
        ("ablation plumbing", ablations),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(p))));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {n} {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {n} {name} ({secs:.1}s): {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::path::Path;
use std::process::Command;

use skid_core::framekit::Raster;

fn skid(root: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_skid"))
        .args(["--seed", "3"])
        .args(args)
        .env("SKID_DATA_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run skid");
    assert!(
        out.status.success(),
        "skid {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn end_to_end_on_tiny_synthetic_data() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("data");
    let work = tmp.path().join("work");

    let summary = skid(
        &root,
        &["synth-data", "--scale", "0.01", "--n-valid", "6", "--n-test", "6", "--side", "192", "--min-frames", "3", "--max-frames", "4"],
    );
    assert!(summary.contains("\"clips\": 11"));
    assert!(skid(&root, &["validate-data"]).contains("ok"));

    let arr = work.join("arr.txt");
    skid(&root, &["gen-arrangements", "--n", "9", "--k", "4", "--out", p(&arr)]);
    assert_eq!(std::fs::read_to_string(&arr).unwrap().lines().count(), 5);

    let dump = work.join("dump");
    skid(&root, &["dump-samples", "--arrangements", p(&arr), "--count", "3", "--out", p(&dump)]);
    assert_eq!(std::fs::read_to_string(dump.join("samples.csv")).unwrap().lines().count(), 4);

    let pre = work.join("pre");
    skid(&root, &["pretext-train", "--variant", "miniature", "--arrangements", p(&arr), "--epochs", "1", "--out", p(&pre)]);
    for f in ["pretext.ckpt", "pretext.csv", "pretext.json", "arrangements.txt"] {
        assert!(pre.join(f).exists(), "{f}");
    }
    let geo = work.join("geo");
    skid(&root, &["geo-train", "--variant", "miniature", "--epochs", "1", "--out", p(&geo)]);
    assert!(geo.join("geo.ckpt").exists());

    let cfg = work.join("down.json");
    std::fs::write(&cfg, r#"{"train": {"lr": 0.001, "frames_per_clip": 3, "eval_frames": 3, "eval_repeats": 2}}"#).unwrap();
    let down = work.join("down");
    let mut test_preds = Vec::new();
    let mut valid_preds = Vec::new();
    for plane in ["sagittal", "coronal", "axial"] {
        skid(
            &root,
            &[
                "downstream-train", "--pretext", p(&pre.join("pretext.ckpt")), "--plane", plane, "--config", p(&cfg),
                "--head-channels", "4", "--epochs", "1", "--out", p(&down),
            ],
        );
        let ckpt = down.join(format!("downstream_{plane}.ckpt"));
        assert!(ckpt.exists());
        let preds = work.join(format!("test_{plane}.csv"));
        let metrics = work.join(format!("test_{plane}.json"));
        skid(
            &root,
            &["evaluate", "--ckpt", p(&ckpt), "--frames", "3", "--repeats", "2", "--n-boot", "50", "--preds", p(&preds), "--metrics", p(&metrics)],
        );
        let text = std::fs::read_to_string(&preds).unwrap();
        assert!(text.starts_with("clip_id,plane,p_abn,p_acl,p_men,y_abn,y_acl,y_men"));
        assert_eq!(text.lines().count(), 7);
        test_preds.push(preds);
        valid_preds.push(down.join(format!("valid_{plane}.csv")));
    }

    let mut args = vec!["ensemble".to_string(), "--preds".into()];
    args.extend(test_preds.iter().map(|x| p(x).to_string()));
    args.push("--weights-from".into());
    args.extend(valid_preds.iter().map(|x| p(x).to_string()));
    let ens = work.join("ensemble.csv");
    let metrics = work.join("ensemble.json");
    args.extend(["--n-boot", "50", "--out", p(&ens), "--metrics", p(&metrics)].map(String::from));
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    skid(&root, &refs);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&metrics).unwrap()).unwrap();
    assert_eq!(report["classes"].as_array().unwrap().len(), 3);
    assert_eq!(std::fs::read_to_string(&ens).unwrap().lines().count(), 7);
    assert!(work.join("ensemble.weights.json").exists());

    let clip = std::fs::read_dir(root.join("test/sagittal")).unwrap().next().unwrap().unwrap().path();
    let cams = work.join("cams");
    skid(
        &root,
        &[
            "gradcam", "--ckpt", p(&down.join("downstream_sagittal.ckpt")), "--clip", p(&clip), "--class", "acl", "--out",
            p(&cams),
        ],
    );
    assert!(cams.join("acl_00.png").exists());
    let geo_cams = work.join("geo_cams");
    skid(&root, &["gradcam", "--ckpt", p(&geo.join("geo.ckpt")), "--clip", p(&clip), "--target", "0", "--layer", "concat", "--frames", "2", "--out", p(&geo_cams)]);
    assert!(geo_cams.join("class0_01.png").exists());

    let frames = work.join("pngs");
    std::fs::create_dir_all(&frames).unwrap();
    for i in 0..3 {
        Raster::from_fn(200, 200, |y, x| ((x + y + i) % 7) as f64 / 7.0)
            .save_png(frames.join(format!("f{i}.png")))
            .unwrap();
    }
    skid(&root, &["import", "--dir", p(&frames), "--clip-id", "new1", "--plane", "axial", "--split", "test", "--labels", "1,0,0"]);
    assert!(root.join("test/axial/new1.skidvol").exists());
    assert!(std::fs::read_to_string(root.join("test/labels.csv")).unwrap().contains("new1,1,0,0"));
}

#[test]
fn errors_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_skid"))
        .args(["validate-data"])
        .env("SKID_DATA_ROOT", tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

use std::path::Path;
use std::process::{Command, Output};

fn btf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btf")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verbs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.btf");
    let ckpt = dir.path().join("m.tpln");
    let png = dir.path().join("r.png");
    let pfm = dir.path().join("r.pfm");

    let o = btf(&["gen-synthetic", "--width", "8", "--height", "8", "--seed", "2", "--out", s(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = btf(&["train", "--data", s(&data), "--epochs", "1", "--out", s(&ckpt)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = btf(&["eval", "--ckpt", s(&ckpt), "--data", s(&data), "--every", "50"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("rmse"));

    for (mode, out) in [("hist", &png), ("hex", &pfm)] {
        let o = btf(&[
            "render", "--ckpt", s(&ckpt), "--mode", mode, "--scale", "3", "--width", "24", "--height", "16", "--out", s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = btf(&["metrics", s(&pfm), s(&pfm)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("dssim 0.000000e0"));

    let quilted = dir.path().join("q.tpln");
    let o = btf(&["synth-quilt", "--ckpt", s(&ckpt), "--scale", "2", "--block", "4", "--overlap", "1", "--out", s(&quilted)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = btf(&["render", "--ckpt", s(&quilted), "--mode", "quilt", "--width", "8", "--height", "8", "--out", s(&png)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = btf(&["bench", "--ckpt", s(&ckpt), "--mode", "repeat", "--n", "200", "--reps", "1"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("ratio="));

    // argument and configuration errors
    assert_eq!(code(&btf(&["render", "--ckpt", s(&ckpt), "--mode", "bogus", "--out", s(&png)])), 2);
    assert_eq!(code(&btf(&["render", "--ckpt", s(&ckpt), "--scale", "-1", "--out", s(&png)])), 2);
    assert_eq!(code(&btf(&["frobnicate"])), 2);
    // data and format errors
    let missing = dir.path().join("missing.tpln");
    assert_eq!(code(&btf(&["eval", "--ckpt", s(&missing), "--data", s(&data)])), 3);
    assert_eq!(code(&btf(&["eval", "--ckpt", s(&data), "--data", s(&data)])), 3);
}

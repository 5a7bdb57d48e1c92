use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use trvbi::bench::rse;
use trvbi::dtf::{load_dtf, load_mask};
use trvbi::vbi::{self, VbiConfig};

fn trvbi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trvbi")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = trvbi(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn synth_count_and_info_headers() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--dims", "10,10,10,10", "--rank", "3", "--snr", "20", "--mr", "0.1"]);
    let mask = load_mask(dir.path().join("mask.msk")).unwrap();
    assert_eq!(mask.len(), 9000);
    let o = trvbi(&["info", &p(dir.path(), "data.dtf"), &p(dir.path(), "mask.msk")]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("DTF1 order 4 dims 10x10x10x10"), "{text}");
    assert!(text.contains("observed 9000"), "{text}");
}

fn complete_report(dir: &Path, report: &str) -> Value {
    let o = trvbi(&[
        "complete",
        "--input",
        &p(dir, "data.dtf"),
        "--mask",
        &p(dir, "mask.msk"),
        "--truth",
        &p(dir, "clean.dtf"),
        "--r-init",
        "4",
        "--max-iters",
        "40",
        "--seed",
        "3",
        "--report",
        &p(dir, report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&std::fs::read_to_string(dir.join(report)).unwrap()).unwrap()
}

#[test]
fn complete_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--dims", "6,6,6", "--rank", "2", "--snr", "30", "--mr", "0.3", "--seed", "4"]);
    let report = complete_report(dir.path(), "r.json");

    let t = load_dtf(dir.path().join("data.dtf")).unwrap();
    let truth = load_dtf(dir.path().join("clean.dtf")).unwrap();
    let mask = load_mask(dir.path().join("mask.msk")).unwrap();
    let cfg = VbiConfig {
        r_init: Some(4),
        max_iters: 40,
        seed: 3,
        ..VbiConfig::default()
    };
    let (state, trace) = vbi::fit(&t, &mask, &cfg).unwrap();
    let est = vbi::complete(&state, true);

    assert_eq!(report["method"], "tr-vbi");
    assert_eq!(report["ranks_inferred"], serde_json::json!(state.bonds()));
    assert_eq!(report["iters"], trace.records.len());
    assert_eq!(report["rse"].as_f64().unwrap(), rse(&est, &truth).unwrap());
    let rows = report["trace"].as_array().unwrap();
    assert_eq!(rows.len(), trace.records.len());
    for (row, rec) in rows.iter().zip(&trace.records) {
        assert_eq!(row["e_tau"].as_f64().unwrap(), rec.e_tau);
        assert_eq!(row["obs_rmse"].as_f64().unwrap(), rec.obs_rmse);
        assert_eq!(row["ranks"], serde_json::json!(rec.ranks));
    }
}

#[test]
fn reports_are_reproducible_apart_from_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--dims", "5,5,5", "--rank", "2", "--snr", "25", "--mr", "0.2"]);
    let mut a = complete_report(dir.path(), "a.json");
    let mut b = complete_report(dir.path(), "b.json");
    a["wall_s"] = Value::Null;
    b["wall_s"] = Value::Null;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn als_and_image_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = image::RgbImage::from_fn(8, 8, |x, y| image::Rgb([(x * 30) as u8, (y * 30) as u8, 128]));
    let input = p(dir.path(), "in.png");
    img.save(&input).unwrap();
    let out = p(dir.path(), "out.png");
    let o = trvbi(&[
        "complete", "--input", &input, "--mr", "0.5", "--method", "tr-als", "--ranks", "2",
        "--shape", "4,2,4,2,3", "--max-iters", "10", "--output", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["method"], "tr-als");
    assert!(report["psnr"].as_f64().unwrap() > 0.0);
    assert!(report["trace"][0]["e_tau"].is_null());
    let o = trvbi(&["info", &out]);
    assert!(stdout(&o).contains("PNG 8x8x3"));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.kv");
    std::fs::write(
        &spec,
        "methods = tr-vbi, tr-als\ndims = 4,4,4\nranks_true = 2\nmr = 0.2\nsnr_db = 30\nreps = 2\nmax_iters = 5\nals_max_iters = 5\n",
    )
    .unwrap();
    let csv = p(dir.path(), "out.csv");
    let o = trvbi(&["bench", "--spec", spec.to_str().unwrap(), "--out", &csv]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("method,dims,ranks_true,r_init,mr,snr_db,seed"));
    assert!(stdout(&o).contains("tr-vbi mr=0.2"));
}

#[test]
fn exit_codes() {
    assert_eq!(trvbi(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(trvbi(&["synth", "--dims", "3,3"]).status.code(), Some(1));
    assert_eq!(trvbi(&["synth", "--dims", "3,3", "--rank", "1", "--mr", "1.5"]).status.code(), Some(1));
    assert_eq!(trvbi(&["info", "/nonexistent/x.dtf"]).status.code(), Some(2));
    assert_eq!(trvbi(&["--help"]).status.code(), Some(0));
}

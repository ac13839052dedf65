//! Criterion 9: rerunning every pipeline stage with identical inputs
//! produces byte-identical outputs. Run manifests are compared on their
//! deterministic fields (the ID hashes version, command, config, inputs, and
//! seed, never the timestamp).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

fn rbaudit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rbaudit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = rbaudit(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// One full pipeline: synthesize, train, estimate with three methods, audit.
fn run_pipeline(dir: &Path) {
    let d = |name: &str| dir.join(name).display().to_string();
    std::fs::create_dir_all(dir).unwrap();
    run_ok(&[
        "synth",
        "gaussians",
        "--n-per-class",
        "25",
        "--stddev",
        "0.6",
        "--seed",
        "3",
        "--out-dir",
        &dir.display().to_string(),
        "--prefix",
        "blobs",
    ]);
    run_ok(&[
        "train",
        "--data",
        &d("blobs.csv"),
        "--arch",
        "affine",
        "--epochs",
        "120",
        "--learning-rate",
        "0.5",
        "--seed",
        "1",
        "--out",
        &d("model.json"),
    ]);
    for (method, out, extra) in [
        ("exact", "exact.csv", vec![]),
        ("deepfool", "df.csv", vec![]),
        (
            "smoothing",
            "rs.csv",
            vec!["--n", "200", "--alpha", "0.01", "--seed", "11"],
        ),
    ] {
        let mut args = vec![
            "estimate".to_string(),
            "--data".into(),
            d("blobs.csv"),
            "--model".into(),
            d("model.json"),
            "--method".into(),
            method.into(),
            "--out".into(),
            d(out),
        ];
        args.extend(extra.into_iter().map(String::from));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        run_ok(&args);
    }
    run_ok(&[
        "audit",
        "--data",
        &d("blobs.csv"),
        "--by",
        "class",
        "--table",
        &d("exact.csv"),
        "--table",
        &d("df.csv"),
        "--table",
        &d("rs.csv"),
        "--rb-tau",
        "0.5",
        "--out-curves",
        &d("curves.csv"),
        "--out-scores",
        &d("scores.json"),
    ]);
}

fn files_sorted(dir: &Path) -> Vec<PathBuf> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
}

#[test]
fn criterion_9_pipeline_reruns_are_byte_identical() {
    let start = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    run_pipeline(&a);
    run_pipeline(&b);

    let fa = files_sorted(&a);
    let fb = files_sorted(&b);
    assert_eq!(
        fa.iter().map(|p| p.file_name().unwrap()).collect::<Vec<_>>(),
        fb.iter().map(|p| p.file_name().unwrap()).collect::<Vec<_>>(),
        "directory listings differ"
    );

    let mut compared_bytes = 0;
    let mut compared_manifests = 0;
    for (pa, pb) in fa.iter().zip(&fb) {
        let name = pa.file_name().unwrap().to_string_lossy().to_string();
        let bytes_a = std::fs::read(pa).unwrap();
        let bytes_b = std::fs::read(pb).unwrap();
        if name.ends_with(".run.json") {
            // Timestamps differ by design; every deterministic field must
            // not.
            let ja: serde_json::Value = serde_json::from_slice(&bytes_a).unwrap();
            let jb: serde_json::Value = serde_json::from_slice(&bytes_b).unwrap();
            for field in ["id", "tool", "version", "command", "seed", "warnings"] {
                assert_eq!(ja.get(field), jb.get(field), "{name}: field {field}");
            }
            // Configs match except for the caller-chosen file locations.
            let depath = |v: &serde_json::Value| -> serde_json::Value {
                let mut c = v.get("config").cloned().unwrap_or_default();
                if let Some(map) = c.as_object_mut() {
                    for key in ["data", "model", "tables", "out", "certificates"] {
                        map.remove(key);
                    }
                }
                c
            };
            assert_eq!(depath(&ja), depath(&jb), "{name}: config");
            let strip = |v: &serde_json::Value| -> Vec<serde_json::Value> {
                v.get("inputs")
                    .and_then(|i| i.as_array())
                    .map(|arr| {
                        arr.iter()
                            .map(|e| {
                                serde_json::json!({
                                    "role": e.get("role"),
                                    "sha256": e.get("sha256"),
                                })
                            })
                            .collect()
                    })
                    .unwrap_or_default()
            };
            assert_eq!(strip(&ja), strip(&jb), "{name}: input digests");
            compared_manifests += 1;
        } else {
            assert_eq!(bytes_a, bytes_b, "{name}: bytes differ between reruns");
            compared_bytes += 1;
        }
    }
    assert!(compared_bytes >= 10, "too few files compared: {compared_bytes}");
    assert!(compared_manifests >= 5);
    println!(
        "[acceptance] criterion 9 (byte-identical pipeline reruns): PASS ({:.2?}, {} data files, {} manifests)",
        start.elapsed(),
        compared_bytes,
        compared_manifests
    );
}

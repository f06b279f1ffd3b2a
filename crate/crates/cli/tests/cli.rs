use std::path::Path;
use std::process::{Command, Output};

fn ocean(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocean"))
        .args(args)
        .args(["--log-level", "warn"])
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn viewer_export_writes_the_viewer_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = ocean(&["viewer-export", "--format", "synthetic", "--out", path(dir.path()), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = dir.path().join("viewer");
    for f in ["data.csv", "metadata.json", "tracks.geojson", "eddies.geojson", "profiles.json"] {
        assert!(v.join(f).is_file(), "{f} missing");
    }
    let pngs = std::fs::read_dir(&v)
        .unwrap()
        .flat_map(|e| walk(&e.unwrap().path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .count();
    assert!(pngs > 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("viewerExport:") && stdout.contains("manifest.json"));
}

fn walk(p: &Path) -> Vec<std::path::PathBuf> {
    if p.is_dir() {
        std::fs::read_dir(p).unwrap().flat_map(|e| walk(&e.unwrap().path())).collect()
    } else {
        vec![p.to_path_buf()]
    }
}

#[test]
fn ingest_then_fronts_from_raw() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let out = ocean(&["ingest", "--format", "synthetic", "--clip", "86,87.5,14,15.5,120", "--out", path(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b = dir.path().join("b");
    let raw = a.join("raw");
    let out = ocean(&["fronts", "--input", path(&raw), "--out", path(&b), "--params", r#"{"neighbourhood": 5}"#]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(b.join("fronts.json").is_file());
}

#[test]
fn run_uses_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pipeline.json");
    std::fs::write(
        &cfg,
        r#"{"input": {"format": "synthetic"}, "outDir": "ignored",
            "steps": [{"op": "eddies"}, {"op": "profile", "params": {"needles": [[87.0, 15.0]]}}]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = ocean(&["run", "--config", path(&cfg), "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["eddies.json", "profile_0.csv", "profiles.json", "manifest.json"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn eddy_flags_reach_the_detector() {
    let dir = tempfile::tempdir().unwrap();
    let out = ocean(&["eddies", "--format", "synthetic", "--persistence-threshold", "-1", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    std::fs::write(&cfg, r#"{"base": {"steps": 2, "depths": 4, "ny": 8, "nx": 8}}"#).unwrap();
    let out = ocean(&[
        "bench", "--suite", "strongScaling", "--sweep", "1,2", "--repeats", "1", "--config", path(&cfg), "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("strongScaling.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "operation,workers,scale,seconds");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(ocean(&["teleport"]).status.code(), Some(2));
    assert_eq!(ocean(&["cinema", "--format", "synthetic", "--out", out, "--params", r#"{"bogus": 1}"#]).status.code(), Some(2));
    let missing = dir.path().join("missing.nc");
    assert_eq!(ocean(&["fronts", "--input", path(&missing), "--variables", "salinity", "--out", out]).status.code(), Some(4));
    assert_eq!(ocean(&["run", "--out", out]).status.code(), Some(2));
    assert_eq!(ocean(&["ingest", "--format", "synthetic", "--clip", "1,2,3", "--out", out]).status.code(), Some(2));
}

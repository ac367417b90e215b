use std::path::Path;
use std::process::{Command, Output};

fn reslab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reslab")).args(args).current_dir(dir).env("RESLAB_THREADS", "2").output().unwrap()
}

#[test]
fn build_resist_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let out = reslab(&["build", "--scheme", "gasket", "--level", "2", "--out", "g2.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = reslab(&["resist", "--net", "g2.json", "--pairs", "0-8", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let r: f64 = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    // vertices 0 and 8 are two corners; (2/3)(5/3)^2
    assert!((r - 50.0 / 27.0).abs() < 1e-12, "{r}");

    let out = reslab(&["simulate", "--net", "g2.json", "--T", "2.5", "--replicas", "5", "--seed", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    let again = reslab(&["simulate", "--net", "g2.json", "--T", "2.5", "--replicas", "5", "--seed", "3"], dir.path());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn experiment_and_homogenize_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"experiment":"btm","levels":[1,2],"alpha":0.5,"replicas":8}"#).unwrap();
    let out = reslab(&["experiment", "--config", "c.json", "--out", "rep"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("rep/report.json").exists());
    assert!(dir.path().join("rep/ks.csv").exists());

    let out = reslab(&["homogenize", "--levels", "1..2", "--samples", "20", "--out", "hom"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("hom/iterates.csv").exists());

    let out = reslab(&["experiment", "--schema"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let schema: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(schema["properties"]["levels"].is_object());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"experiment":"btm","levels":[3,2],"alpha":0.5}"#).unwrap();
    std::fs::write(dir.path().join("typo.json"), r#"{"experiment":"btm","levels":[1,2],"alpah":0.5}"#).unwrap();
    for args in [
        vec!["experiment", "--config", "bad.json"],
        vec!["experiment", "--config", "typo.json"],
        vec!["experiment", "--config", "missing.json"],
        vec!["build", "--scheme", "koch", "--level", "1", "--out", "x.json"],
        vec!["resist", "--net", "missing.json", "--out", "r.csv"],
        vec!["frobnicate"],
    ] {
        let out = reslab(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_reslab"))
        .args(["experiment", "--schema"])
        .env("RESLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

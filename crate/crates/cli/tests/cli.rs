use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hubnet(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hubnet"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HUBNET_SEED")
        .env_remove("HUBNET_CONFIG")
        .env_remove("HUBNET_CAB_PATH")
        .env_remove("HUBNET_EXPERIMENT")
        .output()
        .expect("binary runs")
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn run_is_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("t1"), tmp.path().join("t8"));
    assert_eq!(hubnet(&["run", "--seed", "21", "--threads", "1"], &a).status.code(), Some(0));
    assert_eq!(hubnet(&["run", "--seed", "21", "--threads", "8"], &b).status.code(), Some(0));
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert!(fa.len() >= 15);
    assert_eq!(fa, fb);
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn seed_from_config_file_and_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "scenarios": 8}"#).unwrap();
    let out = tmp.path().join("a");
    let o = hubnet(&["enumerate", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("designs.csv").exists());

    let out = tmp.path().join("b");
    let o = Command::new(env!("CARGO_BIN_EXE_hubnet"))
        .args(["fit", "--out"])
        .arg(&out)
        .env("HUBNET_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("posterior_summary.csv").exists());
}

#[test]
fn input_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(hubnet(&["fit"], &out).status.code(), Some(2));
    assert_eq!(hubnet(&["fit", "--seed", "1", "--experiment", "cab"], &out).status.code(), Some(2));
    let missing = tmp.path().join("nope.txt");
    let o = hubnet(&["fit", "--seed", "1", "--experiment", "cab", "--cab-path", missing.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(hubnet(&["fit", "--seed", "1", "--config", bad.to_str().unwrap()], &out).status.code(), Some(2));
}

#[test]
fn stage_failure_exits_one_and_marks_partial() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"sensitivity": [{"name": "bad", "weights": {"cost": -1, "time": 0.5, "emission": 0.2, "service": 0.5, "hold": 0.5}}]}"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    let o = hubnet(&["run", "--seed", "2", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("evaluations.csv.partial").exists());
    assert!(out.join("manifest.json.partial").exists());
    assert!(csv_files(&out).is_empty());
}

#[test]
fn verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = hubnet(&["verify", "--seed", "3"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = fs::read_to_string(out.join("verify_report.csv")).unwrap();
    assert!(report.lines().count() >= 7);
    assert!(!report.contains(",false,"));
}

//! Command-line behaviour: exit codes, reports and output files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slabprobe"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
[slab]
d1 = 0.0
d2 = 1.0
halfwidth = 2.0

[cavity]
kind = "disc"
center = [0.0, 0.5]
radius = 0.2

[probes]
points = [[0.0, 1.2]]

[mesh]
target_edge = 0.1
grading = 0.04
min_edge = 0.004
"#;

#[test]
fn unknown_key_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SMALL.replace("[mesh]", "[mesh]\nsmoothness = 2"));
    let out = run(&["validate"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("smoothness"));
}

#[test]
fn inconsistent_geometry_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("d1 = 0.0", "d1 = 1.5").replace("[[0.0, 1.2]]", "[[0.0, 1.2], [0.1, 0.4]]");
    let cfg = write(dir.path(), "bad.toml", &text);
    let out = run(&["sweep"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("d1 < d2"), "{err}");
}

#[test]
fn probe_index_out_of_range_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = bin()
        .args(["indicator", "--probe", "3", "--t", "0.4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn forward_writes_fields_and_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = bin()
        .args(["forward", "--t", "0.5", "--h", "0.125", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["field_full.csv", "field_holed.csv", "energy.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert!(energy.starts_with("probe_id,t,h,E,"));
    let off_grid = bin()
        .args(["forward", "--t", "0.5", "--h", "0.13", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(off_grid.status.code(), Some(1));
}

#[test]
fn indicator_on_the_disc_scene_is_outside_below_the_distance() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["indicator", "--probe", "4", "--t", "0.4", "--config"])
        .arg(configs().join("a1.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let slope = std::fs::read_to_string(dir.path().join("slope.csv")).unwrap();
    assert!(slope.lines().nth(1).unwrap().contains(",OUTSIDE,"), "{slope}");
    let series = std::fs::read_to_string(dir.path().join("indicator.csv")).unwrap();
    assert_eq!(series.lines().count(), 9);
}

#[test]
fn empty_scene_sweep_reports_no_cavity() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep"], &configs().join("empty.toml"), dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("no cavity detected"));
    let csv = std::fs::read_to_string(dir.path().join("distances.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains("NOT_DETECTED")).count(), 3);
    assert!(!dir.path().join("mask.txt").exists());
}

#[test]
fn validate_passes_on_the_disc_scene() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["validate"], &configs().join("a1.toml"), dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{stdout}");
}

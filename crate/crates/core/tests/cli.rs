use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim"))
        .args(args)
        .output()
        .expect("spawn sim")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

fn write_scenario(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

const FIG2A: &str = include_str!("../scenarios/fig2a.toml");

fn small_scan(l1: &str) -> String {
    FIG2A
        .replace("n_points = 512", "n_points = 96")
        .replace("l1_mm = 6000.0", &format!("l1_mm = {l1}"))
}

#[test]
fn presets_are_listed() {
    let out = sim(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "fig1c",
        "fig2a",
        "fig2b",
        "fig2c",
        "fig3",
        "fig5-cond-i",
        "fig5-cond-ii",
        "fig5-sim",
        "broadening-6m",
        "broadening-28m",
    ] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name}");
    }
}

#[test]
fn runs_are_deterministic_and_manifest_reproduces() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for dir in [&a, &b] {
        let out = sim(&["run", "--preset", "fig2c", "--out", path_str(dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let first = read_dir_sorted(&a);
    assert_eq!(first, read_dir_sorted(&b));

    let manifest = a.join("manifest.toml");
    let out = sim(&["run", path_str(&manifest), "--out", path_str(&c)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(first, read_dir_sorted(&c));
}

#[test]
fn scan_writes_metrics_with_expected_keys() {
    let tmp = TempDir::new().unwrap();
    let out = sim(&["run", "--preset", "fig2a", "--out", path_str(tmp.path())]);
    assert!(out.status.success());
    for f in ["jsi.csv", "schmidt_eigenvalues.csv", "scan.csv", "metrics.json", "manifest.toml"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("metrics.json")).unwrap()).unwrap();
    for key in ["visibility", "fwhm_ps", "baseline", "fit_residual"] {
        assert!(metrics[key].is_number(), "{key}");
    }
    let scan = fs::read_to_string(tmp.path().join("scan.csv")).unwrap();
    assert_eq!(scan.lines().next(), Some("tau_fs,probability"));
}

#[test]
fn visibility_curve_writes_both_modes() {
    let tmp = TempDir::new().unwrap();
    let out = sim(&["run", "--preset", "fig3", "--out", path_str(tmp.path())]);
    assert!(out.status.success());
    for f in ["visibility_curve_mixed.csv", "visibility_curve_postulated_pure.csv"] {
        let text = fs::read_to_string(tmp.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 6, "{f}");
    }
}

#[test]
fn missing_file_exits_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let out = sim(&["run", path_str(&tmp.path().join("absent.toml"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn negative_length_names_the_key() {
    let tmp = TempDir::new().unwrap();
    let path = write_scenario(tmp.path(), &small_scan("-1.0"));
    let out = sim(&["run", path_str(&path), "--out", path_str(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dispersion.l1_mm"));
}

#[test]
fn unwritable_output_exits_with_io_code() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let path = write_scenario(tmp.path(), &small_scan("6000.0"));
    let out = sim(&["run", path_str(&path), "--out", path_str(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn filter_off_the_spectrum_exits_with_numerical_code() {
    let tmp = TempDir::new().unwrap();
    let text = small_scan("6000.0").replacen(
        "[filters.signal]\ncenter_wavelength = 780.0\nfwhm = 10.0\n",
        "[filters.signal]\ncenter_wavelength = 900.0\nfwhm = 1.0\n",
        1,
    );
    let path = write_scenario(tmp.path(), &text);
    let out = sim(&["run", path_str(&path), "--out", path_str(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn small_scenario_runs() {
    let tmp = TempDir::new().unwrap();
    let path = write_scenario(tmp.path(), &small_scan("6000.0"));
    let out = sim(&["run", path_str(&path), "--out", path_str(&tmp.path().join("o")), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("o/metrics.json").is_file());
}

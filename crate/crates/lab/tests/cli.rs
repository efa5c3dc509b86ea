use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 4] = ["--sphere-res", "16x32", "--radial-res", "12"];

fn hwy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwy"))
        .args(SMALL)
        .args(args)
        .output()
        .expect("spawn hwy")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn verify_elementary_passes_with_json_report() {
    let out = hwy(&["verify", "elementary"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["suite"], "elementary");
    assert_eq!(v["config"]["sphere_res"]["polar"], 16);
    let tests = v["tests"].as_array().unwrap();
    assert!(!tests.is_empty());
    assert!(tests.iter().all(|t| t["pass"] == true));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["verify", "nope"][..],
        &["deficit", "--input", "Y("],
        &["deficit", "--input", "Y(2,1,0)"],
        &["calibrate", "--kind", "nope", "--kappa", "0.1"],
        &["calibrate", "--kind", "lower_p", "--kappa", "1.5"],
        &["optimality", "--family", "42", "--window", "0.3"],
        &["--sphere-res", "16by32", "verify", "geometry"],
    ] {
        let out = hwy(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn constant_has_zero_deficit_in_csv() {
    let out = hwy(&["--format", "csv", "deficit", "--input", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rd = csv::Reader::from_reader(&out.stdout[..]);
    assert_eq!(
        rd.headers().unwrap(),
        vec!["side", "strong_norm", "ext_norm", "deficit"]
    );
    let row = rd.records().next().unwrap().unwrap();
    let d: f64 = row[3].parse().unwrap();
    assert!(d.abs() < 1e-12, "{d}");
}

#[test]
fn literal_upper_bound_fails_calibration() {
    let out = hwy(&[
        "calibrate",
        "--kind",
        "upper_pprime_literal",
        "--kappa",
        "0.1",
        "--points",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["tests"]
        .as_array()
        .unwrap()
        .iter()
        .any(|t| t["pass"] == false));
    let out = hwy(&[
        "calibrate",
        "--kind",
        "upper_pprime",
        "--kappa",
        "0.1",
        "--points",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn optimality_writes_sweep_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = hwy(&[
        "--out",
        d,
        "--format",
        "csv",
        "optimality",
        "--family",
        "42",
        "--points",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let rows = hwy_lab::report::read_sweep_csv(std::fs::File::open(dir.path().join("family_42.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[0].parameter < w[1].parameter));
    assert!(rows.iter().all(|r| r.deficit > 0.0 && r.quotient > 0.0));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("family_42.json")).unwrap()).unwrap();
    assert_eq!(v["suite"], "optimality_42");
}

fn run_deficit_with_cache(cache: &Path) -> Output {
    hwy(&[
        "--kernel-cache",
        cache.to_str().unwrap(),
        "--format",
        "csv",
        "deficit",
        "--input",
        "sum(1,scale(0.2,Y(3)))",
    ])
}

#[test]
fn kernel_cache_roundtrip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("kernel.bin");
    let first = run_deficit_with_cache(&cache);
    assert_eq!(first.status.code(), Some(0));
    assert!(cache.exists());
    let second = run_deficit_with_cache(&cache);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);

    let mut bytes = std::fs::read(&cache).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&cache, &bytes).unwrap();
    let bad = run_deficit_with_cache(&cache);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("cache"));

    // A cache built for another grid is rejected rather than reused.
    let other = dir.path().join("other.bin");
    let out = Command::new(env!("CARGO_BIN_EXE_hwy"))
        .args([
            "--sphere-res",
            "8x16",
            "--radial-res",
            "6",
            "--kernel-cache",
            other.to_str().unwrap(),
        ])
        .args(["deficit", "--input", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(run_deficit_with_cache(&other).status.code(), Some(2));
}

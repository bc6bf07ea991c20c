use std::path::Path;
use std::process::{Command, Output};

fn mobius(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobius"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn without_timestamp(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn non_coprime_progression_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mobius(dir.path(), &["verify", "--modulus", "6", "--a", "4", "--x", "100.5", "--t", "40"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gcd"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["verify", "--character", "4.1", "--x", "100.5"][..],
        &["verify", "--character", "4.1", "--modulus", "4", "--a", "1", "--x", "10", "--t", "10"],
        &["derivsum", "--character", "6.1", "--t", "10"],
        &["lgrid", "--character", "4.1", "--sigma-range", "1:0:0.1", "--t-range", "0:1:1"],
        &["frobnicate"],
    ] {
        assert_eq!(mobius(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
    std::fs::write(dir.path().join("bad.toml"), "modulus = 4\nunknown_key = 1\n").unwrap();
    assert_eq!(mobius(dir.path(), &["verify", "--config", "bad.toml"]).status.code(), Some(2));
}

#[test]
fn progression_report_passes_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--modulus", "4", "--a", "3", "--x", "100.5", "--t", "40"];
    let cold = mobius(dir.path(), &args);
    assert_eq!(cold.status.code(), Some(0), "{}", String::from_utf8_lossy(&cold.stderr));
    assert!(dir.path().join("caches/mobius").is_dir());
    assert!(dir.path().join("caches/zeros/4.1/zeros.lzc").is_file());
    let warm = mobius(dir.path(), &args);
    assert_eq!(warm.status.code(), Some(0));
    assert_eq!(without_timestamp(&cold.stdout), without_timestamp(&warm.stdout));

    let v: serde_json::Value = serde_json::from_slice(&warm.stdout).unwrap();
    assert_eq!(v["schema"], "efr-1");
    assert_eq!(v["config"]["modulus"], 4);
    assert_eq!(v["config"]["t"], 40.0);
    let r = &v["result"]["reports"][0];
    assert_eq!(r["formula"], "corollary1");
    assert_eq!(r["within_budget"], true);
    let res = r["residual"].as_array().unwrap();
    assert!(res[0].as_f64().unwrap().hypot(res[1].as_f64().unwrap()) <= 0.5);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "character = \"4.1\"\nx = [100.5]\nt = 40.0\nformat = \"json\"\n").unwrap();
    let out = mobius(dir.path(), &["verify", "--config", "run.toml", "--t", "45"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["t"], 45.0);
    assert_eq!(v["config"]["character"], "4.1");
    assert_eq!(v["config"]["config_file"], "run.toml");
    assert_eq!(v["result"]["reports"][0]["t_requested"], 45.0);
}

#[test]
fn field_and_product_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = mobius(dir.path(), &["sieve", "--field", "Qi", "--x", "10.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // (3) is inert of norm 9, so m_9 = -1
    assert_eq!(v["result"]["values"][0]["value"][0], -1.0);
    assert!(dir.path().join("caches/fields/Qi/field.txt").is_file());

    let out = mobius(dir.path(), &["fproduct", "--character", "6.1", "--t", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["all_hold"], true);
    let b = v["result"]["b"][0].as_f64().unwrap();
    assert!((b + 0.5 * 2f64.ln()).abs() < 1e-12);
    assert!(!v["result"]["lattice"].as_array().unwrap().is_empty());

    let out = mobius(dir.path(), &["lgrid", "--character", "4.1", "--sigma-range", "0.5:1:0.5", "--t-range", "0:2:1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "sigma,t,re,im,error_estimate");
    assert_eq!(rows.len(), 1 + 2 * 3);
}

#[test]
fn derivative_sum_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = mobius(dir.path(), &["derivsum", "--character", "4.1", "--t", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().find(|l| !l.starts_with('#') && !l.starts_with("gamma")).unwrap();
    let gamma: f64 = first.split(',').next().unwrap().parse().unwrap();
    assert!((gamma - 6.0209489046976).abs() < 1e-6);
}

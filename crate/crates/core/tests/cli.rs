mod common;

use std::path::PathBuf;
use std::process::Command;

use common::*;
use covprob::cli::run;
use covprob::dsl::{parse_model, parse_profile, print_model, print_profile};
use covprob::engine::exact_coverage;
use proptest::prelude::*;
use serde_json::Value;

fn path(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("covprob").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn small(cmd: &str) -> Vec<String> {
    vec![cmd.into(), "-m".into(), path("energy_small.quac"), "-p".into(), path("usage_small.quac")]
}

fn json(args: &[String]) -> (i32, Value) {
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, out, err) = cli(&args);
    (code, serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out}{err}")))
}

#[test]
fn exact_reports_four_fifths() {
    let (code, v) = json(&small("exact"));
    assert_eq!(code, 0);
    assert_eq!(v["mode"], "exact");
    assert_eq!(v["coverage_probability"]["num"], 4);
    assert_eq!(v["coverage_probability"]["den"], 5);
    assert_eq!(v["coverage_probability"]["decimal"], "0.8");
    assert_eq!(v["per_service"]["Network.useLoad"]["den"], 5);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["mode", "model", "profile", "coverage_probability", "per_service", "faults", "assumptions"]
    );
}

#[test]
fn correctness_and_cost() {
    let (code, v) = json(&small("correctness"));
    assert_eq!(code, 0);
    assert_eq!(v["correctness_probability"]["decimal"], "0.8");
    let (code, v) = json(&small("cost"));
    assert_eq!(code, 0);
    assert!(v["expected_error_cost"].is_object(), "{v}");
}

#[test]
fn callprob_of_use_load() {
    let mut args = small("callprob");
    args.extend(["--service".into(), "Network.useLoad".into()]);
    let (code, v) = json(&args);
    assert_eq!(code, 0);
    assert_eq!(v["call_probability"]["decimal"], "1");
}

#[test]
fn approx_interval_contains_four_fifths() {
    let mut args = small("approx");
    args.extend(["--samples".into(), "4000".into(), "--seed".into(), "7".into()]);
    let (code, v) = json(&args);
    assert_eq!(code, 0);
    let i = &v["interval"];
    let (lo, hi) = (i["lo"].as_f64().unwrap(), i["hi"].as_f64().unwrap());
    assert!(lo <= 0.8 && 0.8 <= hi, "{i}");
    // Same seed, same report.
    let (_, again) = json(&args);
    assert_eq!(v, again);
}

#[test]
fn regions_from_goal_file() {
    let (code, out, _) = cli(&[
        "regions",
        "-m",
        &path("energy_small.quac"),
        "--goals",
        &path("useload.goals.json"),
        "--service",
        "Network.useLoad",
        "--domains",
        "load=-8..8,n=0..8",
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("Network.useLoad: n <= load"), "{out}");
    assert!(out.contains("correct on declared domains: yes"), "{out}");
}

#[test]
fn incorrect_region_exits_one() {
    let dir = std::env::temp_dir().join(format!("covprob-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let m = dir.join("m.quac");
    let src = std::fs::read_to_string(path("energy_small.quac")).unwrap().replace("n <= load", "true");
    std::fs::write(&m, src).unwrap();
    let (code, out, _) = cli(&[
        "regions",
        "-m",
        m.to_str().unwrap(),
        "--service",
        "Network.useLoad",
        "--domains",
        "load=0..8,n=0..8",
    ]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("correct on declared domains: no"), "{out}");
}

#[test]
fn check_is_clean() {
    let args = small("check");
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, out, _) = cli(&args);
    assert_eq!(code, 0);
    assert!(out.contains("0 error(s)"), "{out}");
}

#[test]
fn budget_exhaustion_is_a_fault() {
    let mut args = small("exact");
    args.extend(["--budget".into(), "1".into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, _, err) = cli(&args);
    assert_eq!(code, 2);
    assert!(err.contains("budget"), "{err}");
}

#[test]
fn bad_inputs_exit_one() {
    assert_eq!(cli(&["exact", "-m", "missing.quac", "-p", "missing.quac"]).0, 1);
    assert_eq!(cli(&["frobnicate"]).0, 1);
    assert_eq!(cli(&["regions", "-m", &path("energy_small.quac"), "--domains", "load"]).0, 1);
}

#[test]
fn export_round_trips_through_qpp_input() {
    let args = small("export");
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, qpp, _) = cli(&args);
    assert_eq!(code, 0);
    let f = std::env::temp_dir().join(format!("covprob-export-{}.qpp", std::process::id()));
    std::fs::write(&f, qpp).unwrap();
    let (code, out, _) = cli(&["exact", "--qpp", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["coverage_probability"]["decimal"], "0.8");
}

#[test]
fn binary_runs() {
    let out = Command::new(env!("CARGO_BIN_EXE_covprob"))
        .args(small("exact"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"num\": 4"));
}

#[test]
fn unrolling_preserves_exact_coverage() {
    for cycles in [2, 3] {
        let (m, u) = grid(cycles);
        let before = exact_coverage(&m, &u).unwrap().probability;
        let after = exact_coverage(&m, &u.unroll()).unwrap().probability;
        assert_eq!(before, after);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn printed_models_parse_back(sys in small_system()) {
        let (m, u) = sys;
        let m2 = parse_model(&print_model(&m)).unwrap();
        prop_assert_eq!(print_model(&m2), print_model(&m));
        let u2 = parse_profile(&print_profile(&u)).unwrap();
        prop_assert_eq!(print_profile(&u2), print_profile(&u));
        prop_assert_eq!(
            exact_coverage(&m2, &u2).unwrap().probability,
            exact_coverage(&m, &u).unwrap().probability
        );
    }
}

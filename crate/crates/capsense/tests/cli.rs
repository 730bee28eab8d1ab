use std::path::Path;
use std::process::{Command, Output};

use capsense::cli::main_with_args;
use proptest::prelude::*;
use serde_json::Value;

fn capsense(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_capsense"));
    c.args(args).env_remove("CAPSENSE_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    capsense(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn in_process(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("capsense").chain(args.iter().copied()))
}

#[test]
fn capacity_report_layout() {
    let out = run(&["capacity", "--shape", "sphere:2", "--resolution", "8,16"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["verdict"], "pass");
    assert!(r["error"].is_null());
    assert!(r.get("timings").is_none());
    assert_eq!(r["config"]["resolutions"], serde_json::json!([8, 16]));
    assert!(r["config"].get("out").is_none());
    let rows = r["tables"]["capacity"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert!((row[1].as_f64().unwrap() - 2.0).abs() < 1e-8);
    }
}

#[test]
fn timings_are_opt_in() {
    let r = json(&run(&["capacity", "--resolution", "8", "--timings"]));
    assert!(r["timings"]["total_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn invalid_configurations_exit_with_two() {
    for args in [
        &["capacity", "--shape", "sphere:-1"][..],
        &["capacity", "--shape", "torus:1"],
        &["capacity", "--resolution", "7"],
        &["capacity", "--resolution", "4"],
        &["capacity", "--radius", "3"],
        &["converge", "--resolution", "16,32"],
        &["converge", "--resolution", "32,16,64"],
        &["dirichlet", "--resolution", "16,32"],
        &["study", "--h", "Y20", "--eps", "0.02,-0.04"],
        &["study", "--resolution", "16"],
        &["study", "--h", "Y20", "--eps", "3.0", "--resolution", "16"],
        &["spectrum", "--count", "0"],
        &["spectrum", "--resolution", "8", "--count", "33"],
        &["capacity", "--csv"],
        &["capacity", "--threads", "x"],
        &["frobnicate"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["study", "--help"]).status.code(), Some(0));
}

#[test]
fn output_paths_are_checked_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope").join("r.json");
    assert_eq!(in_process(&["capacity", "--out", missing.to_str().unwrap()]), 2);
    assert_eq!(in_process(&["capacity", "--out", dir.path().to_str().unwrap()]), 2);
}

#[test]
fn csv_tables_land_next_to_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.json");
    let status = run(&["converge", "--resolution", "8,12,16", "--out", out.to_str().unwrap(), "--csv"]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(status.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["verdict"], "pass");
    let mut rdr = csv::Reader::from_path(dir.path().join("conv.convergence.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["resolution", "capacity", "rel_error"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 8.0);
    assert!((rows[2][1].parse::<f64>().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn study_tables_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let status = run(&[
        "study", "--shape", "sphere:1", "--h", "Y20", "--kind", "capacity,current", "--resolution", "16",
        "--floor-resolution", "0", "--out", out.to_str().unwrap(), "--csv",
    ]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for kind in ["capacity", "current"] {
        let t = &r["tables"][format!("study_{kind}")];
        assert_eq!(t["columns"], serde_json::json!(["eps", "predicted", "truth", "residual"]));
        assert_eq!(t["rows"].as_array().unwrap().len(), 3);
        assert!(Path::new(&dir.path().join(format!("s.study_{kind}.csv"))).is_file());
    }
    assert_eq!(r["verdict"], "pass");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "shape = \"sphere:3\"\nresolution = [12]\nthreads = 2\n[tolerances]\ncapacity = 0.02\n").unwrap();
    let c = cfg.to_str().unwrap();
    let r = json(&run(&["capacity", "--config", c]));
    assert_eq!(r["config"]["shape_spec"], "sphere:3");
    assert_eq!(r["config"]["resolutions"], serde_json::json!([12]));
    assert_eq!(r["config"]["threads"], 2);
    assert_eq!(r["config"]["tolerances"]["capacity"], 0.02);
    let r = json(&run(&["capacity", "--config", c, "--resolution", "8", "--threads", "1"]));
    assert_eq!(r["config"]["shape_spec"], "sphere:3");
    assert_eq!(r["config"]["resolutions"], serde_json::json!([8]));
    assert_eq!(r["config"]["threads"], 1);
    // the file beats the environment
    let r = json(&capsense(&["capacity", "--config", c]).env("CAPSENSE_THREADS", "5").output().unwrap());
    assert_eq!(r["config"]["threads"], 2);

    std::fs::write(&cfg, "shape = \"sphere:3\"\nresolutoin = [12]\n").unwrap();
    assert_eq!(run(&["capacity", "--config", c]).status.code(), Some(2));
    std::fs::write(&cfg, "[tolerances]\ncapacity = -1.0\n").unwrap();
    assert_eq!(run(&["capacity", "--config", c]).status.code(), Some(2));
    assert_eq!(run(&["capacity", "--config", dir.path().join("absent.toml").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn thread_count_from_the_environment() {
    let r = json(&capsense(&["capacity", "--resolution", "8"]).env("CAPSENSE_THREADS", "3").output().unwrap());
    assert_eq!(r["config"]["threads"], 3);
    let out = capsense(&["capacity", "--resolution", "8"]).env("CAPSENSE_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_is_identical_across_thread_counts() {
    let args = ["dirichlet", "--shape", "ellipsoid:2,1,0.5", "--h", "x", "--resolution", "16"];
    let a = run(&[&args[..], &["--threads", "1"]].concat());
    let b = run(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(a.status.code(), Some(0));
    let (mut ja, mut jb) = (json(&a), json(&b));
    assert_eq!(ja["results"], jb["results"]);
    assert_eq!(ja["tables"], jb["tables"]);
    ja["config"]["threads"] = Value::Null;
    jb["config"]["threads"] = Value::Null;
    assert_eq!(ja, jb);
    assert_eq!(ja["verdicts"]["green_reciprocity"], "pass");
}

#[test]
fn spectrum_of_a_coarse_sphere() {
    let out = run(&["spectrum", "--resolution", "16", "--count", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let lead: Vec<f64> = r["results"]["spectrum"]["leading"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(lead.len(), 4);
    assert!((lead[0] - 0.5).abs() < 1e-12);
}

fn bad_arg() -> impl Strategy<Value = Vec<String>> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    prop_oneof![
        (-1e3f64..=0.0).prop_map(move |r| s(&["capacity", "--shape", &format!("sphere:{r}")])),
        (0.0f64..1e-3, 0.5f64..3.0).prop_map(move |(a, b)| s(&["capacity", "--shape", &format!("ellipsoid:{a},{b},-{b}")])),
        "[a-z]{1,8}".prop_filter("known", |n| !["sphere", "ellipsoid", "star"].contains(&n.as_str()))
            .prop_map(move |n| s(&["capacity", "--shape", &format!("{n}:1")])),
        (0usize..8).prop_map(move |r| s(&["capacity", "--resolution", &r.to_string()])),
        (4usize..200).prop_map(move |r| s(&["capacity", "--resolution", &(2 * r + 1).to_string()])),
        (0.0f64..99.0).prop_map(move |r| s(&["capacity", "--radius", &r.to_string()])),
        (-1.0f64..=0.0).prop_map(move |e| s(&["study", "--h", "Y20", "--eps", &format!("0.01,{e}")])),
        (1usize..4).prop_map(move |n| s(&["converge", "--resolution", &vec!["16"; n.min(2)].join(",")])),
        "[^0-9a-zA-Z]{1,4}".prop_map(move |h| s(&["study", "--h", &h])),
        (-1e3f64..=0.0).prop_map(move |t| s(&["spectrum", "--count", &format!("{}", t as i64)])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn malformed_configurations_never_solve(args in bad_arg()) {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        prop_assert_eq!(in_process(&refs), 2, "{:?}", args);
    }
}

use std::path::Path;
use std::process::Command;

use ctxfuse::cli::main_with_args;
use ctxfuse::profile::ProfileDataset;
use ctxfuse::report::{load_steps_csv, PARETO_HEADER, SCENARIO_HEADER, STEPS_HEADER};

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("ctxfuse").chain(args.iter().copied()))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

#[test]
fn run_writes_steps_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(&[
        "run", "--gate", "oracle", "--lambda-e", "0", "--tc", "30", "--generate", "fog:30,snow:30,night:30",
        "--out", out,
    ]);
    assert_eq!(code, 0);
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["steps"], 90);
    assert_eq!(summary["context_id_steps"], 3);
    assert!(summary["switch_count"].as_u64().unwrap() <= 3);
    assert_eq!(summary["gate"], "oracle");

    let steps = std::fs::read_to_string(dir.path().join("steps.csv")).unwrap();
    assert_eq!(steps.lines().next().unwrap(), STEPS_HEADER.join(","));
    assert_eq!(steps.lines().count(), 91);

    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["profile"]["source"], format!("bundled:{}", ProfileDataset::DEFAULT));
    assert_eq!(manifest["profile"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["args"]["generate"], "fog:30,snow:30,night:30");
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let code = run(&[
            "run", "--gate", "estimator", "--lambda-e", "0.01", "--generate", "rain:45,rural:45", "--seed", "17",
            "--out", dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    for name in ["steps.csv", "summary.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn profile_and_trace_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.json");
    std::fs::write(&profile, ProfileDataset::source(ProfileDataset::DEFAULT).unwrap()).unwrap();
    let p = ProfileDataset::load(ProfileDataset::DEFAULT).unwrap();
    let trace = ctxfuse::scenario::generate_trace(&[(ctxfuse::Context::Fog, 12)], &p, 1).unwrap();
    let trace_path = dir.path().join("trace.jsonl");
    trace.save(&trace_path).unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "run", "--profile", profile.to_str().unwrap(), "--trace", trace_path.to_str().unwrap(), "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(json(&out.join("summary.json"))["steps"], 12);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["trace"]["source"], trace_path.to_str().unwrap());
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["run", "--profile", missing.to_str().unwrap(), "--out", out]), 1);
    assert_eq!(run(&["run", "--trace", missing.to_str().unwrap(), "--out", out]), 1);
    assert_eq!(run(&["run", "--generate", "fog:zero", "--out", out]), 1);
    assert_eq!(run(&["run", "--lambda-e", "1.5", "--generate", "fog:5", "--out", out]), 1);
    assert_eq!(run(&["run", "--gate", "psychic", "--out", out]), 1);
    assert_eq!(run(&["sweep", "--lambdas", "", "--generate", "fog:5", "--out", out]), 1);
    assert_eq!(run(&["sweep", "--lambdas", "0,x", "--generate", "fog:5", "--out", out]), 1);
    assert_eq!(run(&["run", "--tc", "0", "--generate", "fog:5", "--out", out]), 1);

    let bad_profile = dir.path().join("bad.json");
    std::fs::write(&bad_profile, "{\"schema_version\": 1}").unwrap();
    assert_eq!(run(&["run", "--profile", bad_profile.to_str().unwrap(), "--out", out]), 1);
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let out = file.join("sub");
    assert_eq!(run(&["run", "--generate", "fog:5", "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn sweep_rows_and_monotone_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(&[
        "sweep", "--lambdas", "0,0.001,0.01,0.1,1", "--gates", "oracle", "--generate",
        "city:30,fog:30,night:30,snow:30", "--out", out,
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("pareto.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), PARETO_HEADER.join(","));
    let rows = csv_rows(&dir.path().join("pareto.csv"));
    assert_eq!(rows.len(), 5);
    let energy: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(energy.windows(2).all(|w| w[1] <= w[0]), "{energy:?}");
    assert_eq!(json(&dir.path().join("pareto.json")).as_array().unwrap().len(), 5);

    let code = run(&[
        "sweep", "--lambdas", "0,0.01,1", "--gates", "knowledge,estimator,oracle", "--generate", "rain:30",
        "--format", "json", "--out", out,
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(&dir.path().join("pareto.csv"));
    assert_eq!(rows.len(), 9);
    let gates: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(gates[..3], ["knowledge"; 3]);
    assert_eq!(gates[6..], ["oracle"; 3]);
}

#[test]
fn report_aggregates_per_context() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let report_dir = dir.path().join("report");
    let code = run(&[
        "run", "--generate", "fog:40,snow:50", "--out", run_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let steps = run_dir.join("steps.csv");
    assert_eq!(run(&["report", "--steps", steps.to_str().unwrap(), "--out", report_dir.to_str().unwrap()]), 0);
    let text = std::fs::read_to_string(report_dir.join("scenario.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), SCENARIO_HEADER.join(","));
    let rows = csv_rows(&report_dir.join("scenario.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0].as_str(), rows[0][1].as_str()), ("fog", "40"));
    assert_eq!((rows[1][0].as_str(), rows[1][1].as_str()), ("snow", "50"));
    assert_eq!(load_steps_csv(&steps).unwrap().len(), 90);
}

#[test]
fn single_context_report_matches_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    assert_eq!(run(&["run", "--generate", "junction:75", "--lambda-e", "0.01", "--out", run_dir.to_str().unwrap()]), 0);
    let report_dir = dir.path().join("report");
    let steps = run_dir.join("steps.csv");
    assert_eq!(run(&["report", "--steps", steps.to_str().unwrap(), "--out", report_dir.to_str().unwrap()]), 0);
    let rows = csv_rows(&report_dir.join("scenario.csv"));
    assert_eq!(rows.len(), 1);
    let summary = json(&run_dir.join("summary.json"));
    let close = |a: &str, b: &serde_json::Value| {
        let (a, b) = (a.parse::<f64>().unwrap(), b.as_f64().unwrap());
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    };
    assert!(close(&rows[0][2], &summary["avg_loss"]));
    assert!(close(&rows[0][3], &summary["avg_energy_j"]));
    assert!(close(&rows[0][4], &summary["avg_latency_s"]));
}

#[test]
fn report_rejects_empty_or_malformed_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(run(&["report", "--steps", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    let header_only = dir.path().join("header.csv");
    std::fs::write(&header_only, STEPS_HEADER.join(",") + "\n").unwrap();
    assert_eq!(run(&["report", "--steps", header_only.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    let garbage = dir.path().join("garbage.csv");
    std::fs::write(&garbage, "a,b,c\n1,2,3\n").unwrap();
    assert_eq!(run(&["report", "--steps", garbage.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["report", "--steps", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ctxfuse");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args(["run", "--profile", "/definitely/not/here.json"])
        .env("CTXFUSE_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(!status.stderr.is_empty());

    let ok = Command::new(bin)
        .args(["run", "--generate", "city:10"])
        .env("CTXFUSE_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(dir.path().join("summary.json").is_file());

    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use waring_gaps::repcount::{find_gap_runs, sieve_rep, RepTable, WaringParams};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_waring-gaps"));
    c.env_remove("WARING_GAPS_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn no_floats(v: &Value) -> bool {
    match v {
        Value::Number(n) => !n.is_f64(),
        Value::Array(a) => a.iter().all(no_floats),
        Value::Object(o) => o.values().all(no_floats),
        _ => true,
    }
}

#[test]
fn sieve_writes_wrt1_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bin_path = dir.path().join("r33.bin");
    let csv_path = dir.path().join("r33.csv");
    let out = run(&["sieve", "--ell", "3", "--s", "3", "--limit", "20000", "--out", bin_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(json_of(&out)["summary"]["verdict"], "pass");
    let expected = sieve_rep(WaringParams::new(3, 3).unwrap(), 20000).unwrap();
    let read = RepTable::read_binary(fs::File::open(&bin_path).unwrap()).unwrap();
    assert_eq!(read, expected);

    let out = run(&["sieve", "--limit", "500", "--out", csv_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let read = RepTable::read_csv(WaringParams::new(3, 3).unwrap(), fs::File::open(&csv_path).unwrap()).unwrap();
    assert_eq!(read.counts(), &expected.counts()[..=500]);
}

#[test]
fn gaps_csv_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("r33.bin");
    assert_eq!(code(&run(&["sieve", "--limit", "30000", "--out", table.to_str().unwrap()])), 0);
    let out = run(&["gaps", "--table", table.to_str().unwrap(), "--min-len", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("start,length,truncated"));
    let runs = find_gap_runs(&sieve_rep(WaringParams::new(3, 3).unwrap(), 30000).unwrap(), 4);
    let rows: Vec<String> = runs.iter().map(|r| format!("{},{},{}", r.start, r.length, r.truncated)).collect();
    assert_eq!(lines.map(String::from).collect::<Vec<_>>(), rows);
}

#[test]
fn linforms_reports_l_min() {
    let out = run(&["linforms", "--ell", "3", "--q", "2", "--height", "2", "--terms", "64"]);
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert!(v["summary"]["details"]["L_min"]["lower"].as_str().unwrap().contains('/'));
    assert_eq!(v["summary"]["details"]["forms"], 500);
    assert!(no_floats(&v));
}

#[test]
fn flags_override_config_file_and_config_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# greedy run\nto = 50\nfrom = 10\n").unwrap();
    let csv = dir.path().join("g.csv");
    let report = dir.path().join("g.json");
    let out = run(&[
        "greedy",
        "--config",
        conf.to_str().unwrap(),
        "--to",
        "40",
        "--out",
        csv.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["run_config"]["params"]["from"], "10");
    assert_eq!(v["run_config"]["params"]["to"], "40");
    assert_eq!(v["run_config"]["params"]["ell"], "3");
    assert_eq!(v["summary"]["details"]["checked"], 31);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 32);
}

#[test]
fn exit_codes_follow_verdicts_and_error_kinds() {
    // N below M^ell makes the worked Maier certificate invalid
    let maier = ["maier", "--k", "1", "--modulus", "9", "--m", "4", "--eps", "1/100,1/100", "--big-e", "0,0"];
    let ok = run(&[&maier[..], &["--n", "729"]].concat());
    assert_eq!(code(&ok), 0);
    assert_eq!(json_of(&ok)["summary"]["details"]["count"], 81);
    assert_eq!(code(&run(&[&maier[..], &["--n", "728"]].concat())), 3);

    assert_eq!(code(&run(&["nested"])), 0);
    assert_eq!(code(&run(&["nested", "--h", "300"])), 1);

    assert_eq!(code(&run(&["sieve", "--limit", "10", "--bogus", "1"])), 64);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    let bad = run(&["sieve", "--limit", "ten"]);
    assert_eq!(code(&bad), 65);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("limit"));
    let bound = run(&["sieve", "--limit", "1000", "--max-n", "100"]);
    assert_eq!(code(&bound), 66);
    assert!(String::from_utf8_lossy(&bound.stderr).contains("max_n"));
}

#[test]
fn pipeline_with_small_max_n_is_partial() {
    let out = run(&["pipeline", "--max-n", "500"]);
    assert_eq!(code(&out), 2);
    let v = json_of(&out);
    assert_eq!(v["summary"]["details"]["partial"], true);
    let step = v["per_condition"].as_array().unwrap().iter().find(|c| c["name"] == "N >= M^ell").unwrap();
    assert_eq!(step["verdict"], "fail");
}

fn write_report(dir: &Path, name: &str, args: &[&str], threads: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{name}.json"));
    let out = bin().args(args).args(["--threads", threads, "--report", path.to_str().unwrap()]).output().unwrap();
    assert!(code(&out) <= 3, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn replay_reproduces_reports_under_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("mild", vec!["mild-scan", "--limit", "3000", "--to", "1000", "--k", "4", "--e", "8"]),
        ("measure", vec!["measure"]),
        ("linforms", vec!["linforms", "--height", "1"]),
        ("modsearch", vec!["modsearch", "--pool", "2,7,9,13", "--product-bound", "300"]),
        ("pipeline", vec!["pipeline"]),
        ("theta", vec!["theta", "--ell", "4", "--q", "3"]),
        ("exceptional", vec!["exceptional", "--limit", "5000", "--out", "/dev/null"]),
    ];
    for (name, args) in &cases {
        let path = write_report(dir.path(), name, args, "1");
        let original: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert!(no_floats(&original), "{name} has a float field");
        for threads in ["2", "5"] {
            let out = bin().args(["replay", path.to_str().unwrap(), "--threads", threads]).output().unwrap();
            assert_eq!(code(&out), 0, "{name} under {threads} threads: {}", String::from_utf8_lossy(&out.stdout));
        }
        let out = bin().args(["replay", path.to_str().unwrap()]).env("WARING_GAPS_THREADS", "3").output().unwrap();
        assert_eq!(code(&out), 0, "{name} with WARING_GAPS_THREADS");
        let other = write_report(dir.path(), &format!("{name}-4"), args, "4");
        let a: Value = serde_json::from_str(&fs::read_to_string(&other).unwrap()).unwrap();
        for key in ["certificate", "per_condition", "summary"] {
            assert_eq!(original[key], a[key], "{name}.{key} differs between 1 and 4 threads");
        }
    }
}

#[test]
fn replay_detects_a_tampered_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_report(dir.path(), "nested", &["nested"], "1");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["per_condition"][1]["verdict"] = Value::from("fail");
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = run(&["replay", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(json_of(&out)["per_condition"][0]["verdict"], "fail");
}

#[test]
fn mild_scan_points_open_gaps_of_length_k() {
    let out = run(&["mild-scan", "--limit", "2000", "--to", "1000", "--k", "4", "--e", "8"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    let t = sieve_rep(WaringParams::new(3, 3).unwrap(), 2000).unwrap();
    let c = t.counts();
    let points = v["summary"]["details"]["points"].as_array().expect("points");
    assert!(!points.is_empty());
    for p in points {
        let n = p.as_u64().unwrap() as usize;
        assert!((n..n + 4).all(|i| c[i] == 0), "n = {n}");
    }
}

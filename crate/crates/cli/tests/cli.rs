use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pvsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvsc")).args(args).output().expect("binary runs")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timings(mut v: Value) -> String {
    v.as_object_mut().unwrap().remove("timings");
    serde_json::to_string(&v).unwrap()
}

#[test]
fn run_crowdfund() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = pvsc(&["run", "--contract", "crowdfund", "--inputs", "600", "500", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["result"], serde_json::json!([1100]));
    assert_eq!(r["verification"]["ok"], true);
    assert!(r["messages"].as_u64().unwrap() > 0);
    assert!(r["gate_counts"]["and_count"].as_u64().unwrap() > 0);
    assert!(r["timings"]["session_ms"].is_number());
    assert!(String::from_utf8_lossy(&o.stdout).contains("result 1100"));
}

#[test]
fn same_seed_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str| {
        let out = dir.path().join(name);
        let o = pvsc(&["run", "--contract", "millionaire", "--inputs", "3", "5", "--seed", "11", "--nodes", "3", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        report(&out)
    };
    let (a, b) = (go("a.json"), go("b.json"));
    assert_eq!(a["result"], serde_json::json!([1]));
    assert_eq!(without_timings(a), without_timings(b));
}

#[test]
fn failing_policy_exits_2_without_messages() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("policy.toml");
    std::fs::write(&policy, "mandatory_signers = [\"T1\"]\n").unwrap();
    let out = dir.path().join("r.json");
    let o = pvsc(&[
        "run", "--contract", "crowdfund", "--inputs", "600", "500", "--seed", "1",
        "--policy", policy.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["status"], "verification-failed");
    assert_eq!(r["messages"], 0);
    assert!(r.get("result").is_none());

    std::fs::write(&policy, "accept_unproven = false\n").unwrap();
    let o = pvsc(&["run", "--contract", "double_auction", "--inputs", "1,2,3,4,5,6,7,8", "1,2,3,4,5,6,7,8", "--seed", "1", "--policy", policy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(pvsc(&["run", "--contract", "nope", "--inputs", "1"]).status.code(), Some(1));
    assert_eq!(pvsc(&["run", "--contract", "millionaire", "--inputs", "x", "1"]).status.code(), Some(1));
    assert_eq!(pvsc(&["run", "--inputs", "1", "2"]).status.code(), Some(1));
    assert_eq!(pvsc(&["bogus"]).status.code(), Some(1));
    assert_eq!(pvsc(&["run", "--contract", "millionaire", "--inputs", "1", "2", "--engine", "magic"]).status.code(), Some(1));
    assert_eq!(pvsc(&["cover", "--ne", "6", "--no", "2", "-l", "2"]).status.code(), Some(1));
}

#[test]
fn engine_disagreement_aborts_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = pvsc(&["run", "--contract", "millionaire", "--inputs", "3", "5", "--engine", "yao,none", "--seed", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let r = report(&out);
    assert_eq!(r["status"], "protocol-abort");
    assert_eq!(r["messages"], 0);
}

#[test]
fn outsourced_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = pvsc(&["run", "--contract", "crowdfund", "--inputs", "600", "500", "--outsourced", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["result"], serde_json::json!([1100]));
    assert_eq!(r["party_messages_during_seccomp"], 0);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("r.json");
    std::fs::write(&cfg, format!("contract = \"crowdfund\"\ninputs = [\"400\", \"500\"]\nseed = 5\nout = {:?}\n", out.to_str().unwrap())).unwrap();
    assert_eq!(pvsc(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(report(&out)["result"], serde_json::json!([0]));
    assert_eq!(pvsc(&["run", "--config", cfg.to_str().unwrap(), "--inputs", "700", "800"]).status.code(), Some(0));
    assert_eq!(report(&out)["result"], serde_json::json!([1500]));
}

#[test]
fn estimate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.json");
    for (bs, field, want) in [("1500", "gen_seconds", 2.5), ("6000", "verify_seconds", 1.25), ("0", "gen_seconds", 1.5)] {
        assert_eq!(pvsc(&["estimate", bs, "--out", out.to_str().unwrap()]).status.code(), Some(0));
        assert_eq!(report(&out)["estimate"][field].as_f64(), Some(want));
    }
    let r = report(&out);
    assert_eq!((r["estimate"]["verify_seconds"].as_f64(), r["estimate"]["certified_size_bytes"].as_f64()), (Some(0.25), Some(0.0)));
}

#[test]
fn cover_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = pvsc(&["cover", "--ne", "4", "--no", "4", "--te", "3", "--to", "3", "-l", "2", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["point"]["probability"].as_f64(), Some(0.5));
    assert_eq!(r["point"]["agrees"], true);
    pvsc(&["cover", "--ne", "5", "--no", "2", "--te", "0", "--to", "1", "-l", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(report(&out)["point"]["probability"].as_f64(), Some(1.0));
    let o = pvsc(&["cover", "--sweep", "--trials", "20000", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert!(r["points"].as_array().unwrap().len() > 500);
}

#[test]
fn table1_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = pvsc(&["table1", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    let paper = |name: &str| rows.iter().find(|x| x["name"] == name).unwrap()["paper_and_count"].as_u64();
    assert_eq!(paper("millionaire"), Some(96));
    assert_eq!(paper("crowdfund"), Some(128));
    assert!(rows.iter().all(|x| x["ratio"].as_f64().is_some_and(|v| v.is_finite() && v > 0.0)));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("Millionaire") && stdout.contains("Crowdfunding"));
}

use std::path::Path;
use std::process::{Command, Output};

fn diot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diot")).args(args).output().expect("binary runs")
}

fn summary(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn honest_ot1_run_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"n": 32, "l": 2}"#).unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for out in [&a, &b] {
        let o = diot(&["ot1", "--config", config.to_str().unwrap(), "--seed", "7", "--trials", "25", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let s = summary(&a);
    assert_eq!(s["values"]["success_rate"], 1.0);
    assert_eq!(s["spec"]["config"]["seed"], 7);
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 26);
}

#[test]
fn replay_accepts_fresh_and_rejects_broken_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"n": 64, "l": 2}"#).unwrap();
    let o = diot(&["ot4", "--config", config.to_str().unwrap(), "--trials", "1", "--transcripts", dir.path().to_str().unwrap(), "--out", dir.path().join("r.jsonl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let transcript = dir.path().join("trial-000000.json");
    assert_eq!(diot(&["--replay", transcript.to_str().unwrap()]).status.code(), Some(0));

    let text = std::fs::read_to_string(&transcript).unwrap();
    let truncated = dir.path().join("truncated.json");
    std::fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    let o = diot(&["--replay", truncated.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"n": 64, "gamma": 0.5, "diagnostics": true}"#).unwrap();
    let o = diot(&["ot1", "--config", config.to_str().unwrap(), "--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma n <="));
    std::fs::write(&config, r#"{"n": 64, "unknown_knob": 1}"#).unwrap();
    assert_eq!(diot(&["ot1", "--config", config.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(diot(&["ot1", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_with_one() {
    // threshold 1 never aborts, so the classical-detection assertion must fail
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"n": 8, "l": 1, "threshold": 1.0}"#).unwrap();
    let o = diot(&["attack", "--attack", "abort", "--device", "random-answers", "--config", config.to_str().unwrap(), "--trials", "5"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bounds_check_and_estimate_delta_pass() {
    let o = diot(&["bounds-check", "--instances", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = diot(&["estimate-delta", "--synthetic-failure", "0.2", "--trials", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let last: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stdout).lines().last().unwrap()).unwrap();
    assert!((last["values"]["delta_prime"].as_f64().unwrap() - 0.2).abs() < 0.05);
}

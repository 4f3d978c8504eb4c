mod common;

use std::sync::Arc;
use std::time::Duration;

use common::{cbli, cbli_ok, MockServer};

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

#[test]
fn donation_pipeline_writes_provenance() {
    let dir = tmp();
    let d = dir.path();
    std::fs::write(d.join("exp.toml"), "seed = 4\n[generation]\nusers = 40\n[run]\nsteps = 100\nrepetitions = 2\neval_users = 50\n").unwrap();
    let args = |cmd: &'static str| vec!["--config", "exp.toml", "--output-dir", "out", cmd];
    cbli_ok(d, &args("gen-users"));
    cbli_ok(d, &args("gen-prefs"));
    cbli_ok(d, &args("pretrain"));
    let run = cbli_ok(d, &args("run"));
    assert!(run.contains("reduction"), "{run}");

    let users = std::fs::read_to_string(d.join("out/users.jsonl")).unwrap();
    let prefs = std::fs::read_to_string(d.join("out/prefs.jsonl")).unwrap();
    let model = std::fs::read_to_string(d.join("out/model.txt")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/runs/summary.json")).unwrap()).unwrap();
    let header: serde_json::Value = serde_json::from_str(prefs.lines().next().unwrap()).unwrap();
    let hash = header["provenance"]["config_hash"].as_str().unwrap().to_owned();
    assert_eq!(hash.len(), 16);
    assert_eq!(header["provenance"]["seed"], "4");
    assert_eq!(header["count"], 40);
    assert!(users.lines().next().unwrap().contains(&hash));
    assert!(model.contains(&format!("meta config_hash {hash}")));
    assert_eq!(summary["provenance"]["config_hash"], hash.as_str());
    assert_eq!(summary["repetitions"], 2);
    assert_eq!(summary["steps"], 100);
    let trace = std::fs::read_to_string(d.join("out/runs/pretrained_0.tsv")).unwrap();
    assert!(trace.starts_with("# seed: 4\n"));
    assert!(trace.contains(&format!("# config_hash: {hash}")));
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 101);

    let report = cbli_ok(d, &["--output-dir", "out", "report"]);
    assert!(report.contains("| standard | 100 | 2 |"), "{report}");
}

#[test]
fn zero_users_is_an_empty_file() {
    let dir = tmp();
    let out = cbli_ok(dir.path(), &["--output-dir", ".", "gen-users", "--users", "0"]);
    assert!(out.contains("wrote 0 users"));
    let text = std::fs::read_to_string(dir.path().join("users.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn pretrain_zero_steps_is_a_fresh_model() {
    let dir = tmp();
    let d = dir.path();
    cbli_ok(d, &["--output-dir", ".", "gen-users", "--users", "5"]);
    cbli_ok(d, &["--output-dir", ".", "gen-prefs"]);
    cbli_ok(d, &["--output-dir", ".", "pretrain", "--steps", "0"]);
    let model = std::fs::read_to_string(d.join("model.txt")).unwrap();
    assert!(model.contains("\nupdates 0\n"));
}

#[test]
fn exit_codes_follow_error_kinds() {
    let dir = tmp();
    let d = dir.path();
    let code = |args: &[&str]| cbli(d, args).status.code();

    // Configuration.
    std::fs::write(d.join("bad.toml"), "[bandit]\nridge = -1.0\n").unwrap();
    assert_eq!(code(&["--config", "bad.toml", "gen-users"]), Some(2));
    assert_eq!(code(&["--config", "missing.toml", "gen-users"]), Some(2));
    assert_eq!(code(&["--set", "run.nope=1", "gen-users"]), Some(2));
    assert_eq!(code(&["check-rank", "--p", "0.5,1.5"]), Some(2));
    assert_eq!(code(&["--scenario", "vaccine", "run"]), Some(2));
    assert_eq!(code(&["--scenario", "vaccine", "replay"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));

    // Data.
    assert_eq!(code(&["--output-dir", "empty", "pretrain"]), Some(3));
    std::fs::create_dir(d.join("bad")).unwrap();
    std::fs::write(d.join("bad/prefs.jsonl"), "{\"format\":\"cbli-prefs\",\"version\":1,\"count\":3}\n").unwrap();
    assert_eq!(code(&["--output-dir", "bad", "pretrain"]), Some(3));
    std::fs::write(d.join("log.csv"), "respondent,task\n1,1\n").unwrap();
    assert_eq!(code(&["--scenario", "vaccine", "--output-dir", "bad", "replay", "--log", "log.csv"]), Some(3));

    // Oracle fatal: the endpoint rejects the credentials.
    let mock = MockServer::start(2, Duration::ZERO, 401, Arc::new(|_: &str| String::new()));
    cbli_ok(d, &["--output-dir", "llm", "gen-users", "--users", "2"]);
    let endpoint = format!("oracle.llm.endpoint=\"{}\"", mock.url);
    let out = cbli(d, &["--output-dir", "llm", "--set", &endpoint, "gen-prefs", "--oracle", "llm"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("authentication"));
}

#[test]
fn check_rank_reports_both_forms() {
    let dir = tmp();
    let text = cbli_ok(dir.path(), &["check-rank", "--p", "0.9,0.5,0.1", "--trials", "20000"]);
    assert!(text.contains("0\t0.9\t2.1000\t"), "{text}");
    assert!(text.contains("order_preserved\ttrue"));
    let json = cbli_ok(dir.path(), &["check-rank", "--p", "0.3,0.3", "--trials", "10", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["theoretical"], serde_json::json!([1.0, 1.0]));
    assert_eq!(v["trials"], 10);
}

#[test]
fn vaccine_replay_with_masks() {
    let dir = tmp();
    let d = dir.path();
    let base = ["--scenario", "vaccine", "--output-dir", "v", "--set", "generation.users=60"];
    let with = |extra: &[&'static str]| -> Vec<&str> { base.iter().copied().chain(extra.iter().copied()).collect() };
    cbli_ok(d, &with(&["synth-log", "--participants", "30"]));
    cbli_ok(d, &with(&["gen-users"]));
    cbli_ok(d, &with(&["gen-prefs"]));
    for mask in ["full", "no_personal", "only_personal", "partial_personal"] {
        let m = format!("run.mask=\"{mask}\"");
        let mut args = with(&["--set"]);
        args.push(&m);
        let mut pre = args.clone();
        pre.push("pretrain");
        cbli_ok(d, &pre);
        let mut rep = args.clone();
        rep.extend(["replay", "--log", "v/conjoint.csv", "--repetitions", "2"]);
        let text = cbli_ok(d, &rep);
        assert!(text.contains("T = 150, 2 runs"), "{mask}: {text}");
    }
    // A model trained under one mask does not fit another.
    let out = cbli(d, &with(&["replay", "--log", "v/conjoint.csv"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replayed_choices_as_oracle() {
    let dir = tmp();
    let d = dir.path();
    let args = ["--scenario", "vaccine", "--output-dir", "r", "--set", "paths.log=\"r/conjoint.csv\""];
    let with = |extra: &[&'static str]| -> Vec<&str> { args.iter().copied().chain(extra.iter().copied()).collect() };
    cbli_ok(d, &with(&["synth-log", "--participants", "20"]));
    let text = cbli_ok(d, &with(&["gen-prefs", "--oracle", "replay"]));
    assert!(text.contains("wrote 20 users (0 dropped, 0 failed queries)"), "{text}");
    let prefs = std::fs::read_to_string(d.join("r/prefs.jsonl")).unwrap();
    let header: serde_json::Value = serde_json::from_str(prefs.lines().next().unwrap()).unwrap();
    assert_eq!(header["oracle"], "replay");
    // Recorded answers are deterministic: every fraction is 0 or 1.
    for line in prefs.lines().skip(1) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for e in v["rewards"]["entries"].as_array().unwrap() {
            let f = e["fraction"].as_f64().unwrap();
            assert!(f == 0.0 || f == 1.0);
        }
    }
    cbli_ok(d, &with(&["pretrain"]));
    cbli_ok(d, &with(&["replay", "--repetitions", "1"]));
}

#[test]
fn concurrency_limit_is_reached_but_not_exceeded() {
    let dir = tmp();
    let d = dir.path();
    let mock = MockServer::start(6, Duration::from_millis(40), 200, Arc::new(|_: &str| "[Answer] 1".to_owned()));
    let sets = [
        format!("oracle.llm.endpoint=\"{}\"", mock.url),
        "oracle.llm.max_in_flight=2".to_owned(),
        "oracle.llm.requests_per_minute=10000".to_owned(),
        "generation.repeats=1".to_owned(),
    ];
    let mut args: Vec<&str> = vec!["--output-dir", ".", "--jobs", "4"];
    for s in &sets {
        args.extend(["--set", s.as_str()]);
    }
    let with = |extra: &[&'static str]| -> Vec<&str> { args.iter().copied().chain(extra.iter().copied()).collect() };
    cbli_ok(d, &with(&["gen-users", "--users", "4"]));
    cbli_ok(d, &with(&["gen-prefs", "--oracle", "llm"]));
    assert_eq!(mock.hits().len(), 4 * 12);
    assert_eq!(mock.peak_in_flight(), 2);
}

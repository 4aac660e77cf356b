use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn lpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpp")).args(args).output().expect("spawn lpp")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn reconfigure_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let net = data("fixture13.net");
    let out = lpp(&[
        "reconfigure",
        net.to_str().unwrap(),
        "--lambda",
        "10",
        "--max-iters",
        "5",
        "--eps-p",
        "0.1",
        "--eps-q",
        "0.1",
        "--gap",
        "0.0001",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).lines().next().unwrap().contains("Iteration"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["termination"], "threshold-met");
    assert!(json["iterations"].as_array().unwrap().len() >= 2);
}

#[test]
fn restore_reports_islands() {
    let out = lpp(&["restore", data("fixture13_restore.net").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("Islands"), "{text}");
    let islands: usize = text.lines().last().unwrap().split_whitespace().last().unwrap().parse().unwrap();
    assert!(islands >= 2);
}

#[test]
fn validate_accepts_fixture_and_rejects_garbage() {
    let ok = lpp(&["validate", data("fixture13.net").to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("13"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = lpp(&["validate", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = lpp(&["reconfigure", data("fixture13.net").to_str().unwrap(), "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixed_big_m_and_model_dump() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("model.lp");
    let out = lpp(&[
        "reconfigure",
        data("fixture13.net").to_str().unwrap(),
        "--big-m",
        "fixed:1e4",
        "--max-iters",
        "1",
        "--format",
        "json",
        "--dump-model",
        lp.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["iterations"].as_array().unwrap().len(), 2);
    let text = std::fs::read_to_string(&lp).unwrap();
    assert!(text.contains("Subject To") || text.contains("subject to"), "{}", &text[..200.min(text.len())]);

    let bad = lpp(&["reconfigure", data("fixture13.net").to_str().unwrap(), "--big-m", "fixed:-1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_prints_one_row_per_lambda() {
    let out = lpp(&["sweep-lambda", data("fixture13.net").to_str().unwrap(), "--lambdas", "2,4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 3);
}

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn ocbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocbc")).args(args).output().expect("binary runs")
}

fn ocbc_with_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ocbc"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn conforming_order_log_exits_zero() {
    let out = ocbc(&["check", &fixture("fig2.ocbc.json"), &fixture("fig2-conforming.oclog.jsonl")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("CONFORMS: yes\n"));
}

#[test]
fn correlation_log_reports_two_constraint_violations() {
    let out = ocbc(&["check", &fixture("fig13.ocbc.json"), &fixture("fig13.oclog.jsonl")]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("  - constraint c at reference event")).count(), 2);
}

#[test]
fn selecting_kinds_skips_the_rest() {
    let model = fixture("fig12.ocbc.json");
    let log = fixture("fig12.oclog.jsonl");
    assert_eq!(ocbc(&["check", &model, &log]).status.code(), Some(1));
    assert_eq!(ocbc(&["check", &model, &log, "--types", "IX"]).status.code(), Some(0));
    assert_eq!(ocbc(&["check", &model, &log, "--types", "VIII"]).status.code(), Some(1));
    let bad = ocbc(&["check", &model, &log, "--types", "X"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn model_validation() {
    assert_eq!(ocbc(&["validate-model", &fixture("fig10.ocbc.json")]).status.code(), Some(0));
    let defective = ocbc(&["validate-model", &fixture("errors/defects.ocbc.json")]);
    assert_eq!(defective.status.code(), Some(1));
    assert!(stdout(&defective).contains("undeclared class `D`"));
    let missing = ocbc(&["validate-model", &fixture("no-such-model.ocbc.json")]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no-such-model.ocbc.json"));
}

#[test]
fn unreadable_log_exits_two() {
    let out = ocbc(&["check", &fixture("fig2.ocbc.json"), &fixture("errors/syntax.oclog.jsonl")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn generation_is_reproducible_and_conforms() {
    let model = fixture("fig10.ocbc.json");
    let a = ocbc(&["generate", &model, "--events", "40", "--seed", "5"]);
    let b = ocbc(&["generate", &model, "--events", "40", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).lines().count() >= 40);

    let checked = ocbc_with_stdin(&["check", &model, "-"], &a.stdout);
    assert_eq!(checked.status.code(), Some(0), "{}", stdout(&checked));
}

#[test]
fn injected_violations_are_detected() {
    let model = fixture("fig2.ocbc.json");
    let generated = ocbc(&["generate", &model, "--seed", "3", "--inject", "IX"]);
    assert_eq!(generated.status.code(), Some(0));
    let checked = ocbc_with_stdin(&["check", &model, "-", "--types", "IX"], &generated.stdout);
    assert_eq!(checked.status.code(), Some(1));
}

#[test]
fn json_report_to_a_file_renders_back_to_text() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let path = path.to_str().unwrap();
    let model = fixture("fig12.ocbc.json");
    let log = fixture("fig12.oclog.jsonl");

    let out = ocbc(&["check", &model, &log, "--format", "json", "--out", path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let json = std::fs::read_to_string(path).unwrap();
    assert!(json.trim_start().starts_with('{'));
    assert!(json.contains("\"conforms\": false") || json.contains("\"conforms\":false"));

    let rendered = ocbc(&["render", path]);
    assert_eq!(rendered.status.code(), Some(0));
    let direct = ocbc(&["check", &model, &log]);
    assert_eq!(rendered.stdout, direct.stdout);
}

#[test]
fn running_process_prefix_has_only_warnings() {
    let full = std::fs::read_to_string(fixture("fig2-conforming.oclog.jsonl")).unwrap();
    let head: String = full.lines().take(15).map(|l| format!("{l}\n")).collect();
    let model = fixture("fig2.ocbc.json");

    let complete = ocbc_with_stdin(&["check", &model, "-"], head.as_bytes());
    assert_eq!(complete.status.code(), Some(1));
    let running = ocbc_with_stdin(&["check", &model, "-", "--prefix"], head.as_bytes());
    assert_eq!(running.status.code(), Some(0), "{}", stdout(&running));
    assert!(stdout(&running).contains("[warning]"));
}

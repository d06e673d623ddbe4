mod support;

use ocbc::io::{load_report, save_report};
use ocbc::{aggregate, check_all, check_with, render_text, CheckOptions, ProblemKind};
use support::{log, model};

#[test]
fn failing_reference_events_are_counted_per_constraint() {
    let report = check_all(&model("fig13.ocbc.json"), &log("fig13.oclog.jsonl"));
    assert_eq!(report.per_constraint.get("c"), Some(&2));
    assert_eq!(report.count(ProblemKind::IX), 2);
}

#[test]
fn link_annotations_are_counted_per_edge() {
    let report = check_all(&model("fig12.ocbc.json"), &log("fig12.oclog.jsonl"));
    assert_eq!(report.per_aoc_edge.len(), 1);
    let edge = &report.per_aoc_edge[0];
    assert_eq!((edge.activity.as_str(), edge.class.as_str()), ("pay", "ticket"));
    assert_eq!((edge.always, edge.eventually, edge.objects), (1, 1, 1));
}

#[test]
fn empty_report() {
    let report = aggregate(Vec::new());
    assert!(report.conforms);
    assert_eq!(report.errors + report.warnings, 0);
    assert!(report.summary.values().all(|&n| n == 0));
    assert!(report.per_constraint.is_empty() && report.per_aoc_edge.is_empty() && report.per_rel_type.is_empty());

    let text = render_text(&report);
    assert_eq!(text.lines().next(), Some("CONFORMS: yes"));
    assert_eq!(text.lines().filter(|l| l.trim_end().ends_with(" 0")).count(), 9);
}

#[test]
fn rendered_ticket_report() {
    let text = render_text(&check_all(&model("fig12.ocbc.json"), &log("fig12.oclog.jsonl")));
    assert_eq!(text.lines().next(), Some("CONFORMS: no (3 errors, 0 warnings)"));
    for line in [
        "  - pay events of ticket object t3: expected □ 0..1, observed 2 at p2 (seq 2)",
        "  - pay events of ticket object t5: expected ◇ 1, observed 0 at p4 (seq 4)",
        "  - ticket objects of pay event p3: expected 1..*, observed 0 at p3 (seq 3)",
    ] {
        assert!(text.lines().any(|l| l == line), "missing {line:?} in\n{text}");
    }
}

#[test]
fn rendered_correlation_report() {
    let text = render_text(&check_all(&model("fig13.ocbc.json"), &log("fig13.oclog.jsonl")));
    let ix: Vec<&str> = text.lines().filter(|l| l.starts_with("  - constraint c ")).collect();
    assert_eq!(
        ix,
        [
            "  - constraint c at reference event e3: expected unary-precedence, observed (before, after) = (0, 1) at e3 (seq 3)",
            "  - constraint c at reference event e6: expected unary-precedence, observed (before, after) = (0, 0) at e6 (seq 6)",
        ]
    );
}

#[test]
fn prefix_mode_reports_repairable_problems_as_warnings() {
    let m = model("fig2.ocbc.json");
    let full = log("fig2-conforming.oclog.jsonl");
    let running = support::prefix(&full, 15);
    let options = CheckOptions {
        prefix: true,
        ..CheckOptions::default()
    };
    let report = check_with(&m, &running, &options);
    assert!(!report.conforms);
    assert_eq!(report.errors, 0, "{}", render_text(&report));
    assert!(report.warnings > 0);
    assert!(render_text(&report).contains("[warning]"));
    let complete = check_all(&m, &running);
    assert_eq!(complete.errors, report.warnings);
}

#[test]
fn report_documents() {
    let conforming = save_report(&check_all(&model("fig2.ocbc.json"), &log("fig2-conforming.oclog.jsonl")));
    let value: serde_json::Value = serde_json::from_str(&conforming).unwrap();
    assert_eq!(value["conforms"], serde_json::Value::Bool(true));
    assert_eq!(value["violations"], serde_json::json!([]));
    assert_eq!(value["per_constraint"], serde_json::json!({}));

    let report = check_all(&model("fig12.ocbc.json"), &log("fig12.oclog.jsonl"));
    let text = save_report(&report);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let kinds: Vec<&str> = value["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["VII", "VII", "VIII"]);
    assert_eq!(load_report(text.as_bytes()).unwrap(), report);
}

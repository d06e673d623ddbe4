//! Aggregated diagnostics: per-kind counts plus counts per constraint,
//! per activity/class link and per relationship type.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conformance::{ProblemKind, Severity, Subject, Violation};
use crate::model::{Modality, Side};

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AocEdgeCounts {
    pub activity: String,
    pub class: String,
    /// Type VII breaches of the always-cardinality.
    pub always: usize,
    /// Type VII breaches of the eventually-cardinality.
    pub eventually: usize,
    /// Type VIII events with the wrong number of objects.
    pub objects: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelTypeCounts {
    pub source_always: usize,
    pub source_eventually: usize,
    pub target_always: usize,
    pub target_eventually: usize,
    /// Relations whose endpoints have the wrong classes.
    pub typing: usize,
}

impl RelTypeCounts {
    fn slot(&mut self, side: Side, modality: Modality) -> &mut usize {
        match (side, modality) {
            (Side::Source, Modality::Always) => &mut self.source_always,
            (Side::Source, Modality::Eventually) => &mut self.source_eventually,
            (Side::Target, Modality::Always) => &mut self.target_always,
            (Side::Target, Modality::Eventually) => &mut self.target_eventually,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformanceReport {
    pub conforms: bool,
    pub errors: usize,
    pub warnings: usize,
    /// Number of violations of each kind; all nine kinds are present.
    pub summary: BTreeMap<ProblemKind, usize>,
    /// Number of failing reference events per constraint.
    pub per_constraint: BTreeMap<String, usize>,
    pub per_aoc_edge: Vec<AocEdgeCounts>,
    pub per_rel_type: BTreeMap<String, RelTypeCounts>,
    /// Undeclared activities appearing in the log.
    pub unknown_activities: Vec<String>,
    pub violations: Vec<Violation>,
}

impl Default for ConformanceReport {
    fn default() -> Self {
        aggregate(Vec::new())
    }
}

impl ConformanceReport {
    pub fn count(&self, kind: ProblemKind) -> usize {
        self.summary.get(&kind).copied().unwrap_or(0)
    }

    pub fn of_kind(&self, kind: ProblemKind) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.kind == kind)
    }
}

/// Builds the report for a set of violations. The violations are sorted.
pub fn aggregate(mut violations: Vec<Violation>) -> ConformanceReport {
    violations.sort();
    let mut summary: BTreeMap<ProblemKind, usize> =
        ProblemKind::ALL.into_iter().map(|k| (k, 0)).collect();
    let mut per_constraint: BTreeMap<String, usize> = BTreeMap::new();
    let mut edges: BTreeMap<(String, String), AocEdgeCounts> = BTreeMap::new();
    let mut per_rel_type: BTreeMap<String, RelTypeCounts> = BTreeMap::new();
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    let mut warnings = 0;

    for v in &violations {
        *summary.entry(v.kind).or_default() += 1;
        if v.severity == Severity::Warning {
            warnings += 1;
        }
        match &v.subject {
            Subject::ConstraintAtEvent { constraint, .. } => {
                *per_constraint.entry(constraint.clone()).or_default() += 1;
            }
            Subject::EventsPerObject {
                activity, class, ..
            } => {
                let counts = edge(&mut edges, activity, class);
                match v.modality {
                    Some(Modality::Eventually) => counts.eventually += 1,
                    _ => counts.always += 1,
                }
            }
            Subject::ObjectsPerEvent {
                activity, class, ..
            } => {
                edge(&mut edges, activity, class).objects += 1;
            }
            Subject::ObjectCardinality { rel_type, side, .. } => {
                let modality = v.modality.unwrap_or(Modality::Always);
                *per_rel_type.entry(rel_type.clone()).or_default().slot(*side, modality) += 1;
            }
            Subject::RelationTyping { rel_type, .. } => {
                per_rel_type.entry(rel_type.clone()).or_default().typing += 1;
            }
            Subject::UnknownActivity { activity, .. } => {
                unknown.insert(activity.clone());
            }
            Subject::Disappeared { .. }
            | Subject::ClassChanged { .. }
            | Subject::MissingObject { .. }
            | Subject::ImproperClass { .. } => {}
        }
    }

    ConformanceReport {
        conforms: violations.is_empty(),
        errors: violations.len() - warnings,
        warnings,
        summary,
        per_constraint,
        per_aoc_edge: edges.into_values().collect(),
        per_rel_type,
        unknown_activities: unknown.into_iter().collect(),
        violations,
    }
}

fn edge<'a>(
    edges: &'a mut BTreeMap<(String, String), AocEdgeCounts>,
    activity: &str,
    class: &str,
) -> &'a mut AocEdgeCounts {
    edges
        .entry((activity.to_string(), class.to_string()))
        .or_insert_with(|| AocEdgeCounts {
            activity: activity.to_string(),
            class: class.to_string(),
            ..AocEdgeCounts::default()
        })
}

/// A stable, line-oriented rendering of a report.
pub fn render_text(report: &ConformanceReport) -> String {
    let mut out = String::new();
    if report.conforms {
        out.push_str("CONFORMS: yes\n");
    } else {
        let _ = writeln!(
            out,
            "CONFORMS: no ({} errors, {} warnings)",
            report.errors, report.warnings
        );
    }
    out.push_str("\nSUMMARY\n");
    for kind in ProblemKind::ALL {
        let _ = writeln!(
            out,
            "  {:<5} {:<36} {}",
            kind.numeral(),
            kind.title(),
            report.count(kind)
        );
    }
    if report.conforms {
        return out;
    }

    for kind in ProblemKind::ALL {
        let _ = writeln!(
            out,
            "\nTYPE {} ({}): {}",
            kind.numeral(),
            kind.title(),
            report.count(kind)
        );
        for v in report.of_kind(kind) {
            let _ = writeln!(out, "  - {v}");
        }
    }

    if !report.per_constraint.is_empty() {
        out.push_str("\nFAILING REFERENCE EVENTS PER CONSTRAINT\n");
        for (c, n) in &report.per_constraint {
            let _ = writeln!(out, "  {c}: {n}");
        }
    }
    if !report.per_aoc_edge.is_empty() {
        out.push_str("\nACTIVITY/CLASS LINKS (always, eventually, objects per event)\n");
        for e in &report.per_aoc_edge {
            let _ = writeln!(
                out,
                "  ({}, {}): {}, {}, {}",
                e.activity, e.class, e.always, e.eventually, e.objects
            );
        }
    }
    if !report.per_rel_type.is_empty() {
        out.push_str("\nRELATIONSHIP TYPES (source always/eventually, target always/eventually, typing)\n");
        for (r, c) in &report.per_rel_type {
            let _ = writeln!(
                out,
                "  {r}: {}/{}, {}/{}, {}",
                c.source_always, c.source_eventually, c.target_always, c.target_eventually, c.typing
            );
        }
    }
    if !report.unknown_activities.is_empty() {
        let _ = writeln!(
            out,
            "\nUNKNOWN ACTIVITIES: {}",
            report.unknown_activities.join(", ")
        );
    }
    out
}

//! Reading and writing the three document formats: models (`.ocbc.json`),
//! logs (`.oclog.jsonl`) and reports (`.report.json`).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::error::Category;
use thiserror::Error;

use crate::bc::{expand_shorthand, PairConstraint};
use crate::cardinality::{Cardinality, CardinalityError};
use crate::constraint_type::{builtin_constraint_type, ConstraintType, ConstraintTypeError};
use crate::log::{DeltaError, Event, EventLog, LogError, LogWarning, ObjectDelta, ObjectModel, Relation};
use crate::model::{
    AocLink, Constraint, ModelDefect, OcbcModel, RelationshipType, Universe,
};
use crate::report::ConformanceReport;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid cardinality for {context}: {source}")]
    Cardinality {
        context: String,
        source: CardinalityError,
    },
    #[error("invalid constraint type for {context}: {source}")]
    ConstraintType {
        context: String,
        source: ConstraintTypeError,
    },
    #[error("model is not well-formed:{}", list(.0))]
    Defects(Vec<ModelDefect>),
    #[error("line {line}: sequence number must be an integer between 1 and 18446744073709551615")]
    SeqRange { line: usize },
    #[error("line {line}: duplicate sequence number {seq} (first used on line {first_line})")]
    DuplicateSeq {
        line: usize,
        seq: u64,
        first_line: usize,
    },
    #[error("line {line}: duplicate event id `{id}` (first used on line {first_line})")]
    DuplicateEventId {
        line: usize,
        id: String,
        first_line: usize,
    },
    #[error("line {line}: an init object model is only allowed on the first line")]
    MisplacedInit { line: usize },
    #[error("line {line}: {source}")]
    Log { line: usize, source: LogError },
}

fn list(defects: &[ModelDefect]) -> String {
    defects.iter().map(|d| format!("\n  - {d}")).collect()
}

/// Converts a serde_json error, shifting its line number by `line_offset`.
fn json_error(err: serde_json::Error, line_offset: usize) -> FormatError {
    let line = err.line() + line_offset;
    let column = err.column();
    // serde_json appends " at line L column C"; the position is kept
    // separately, so strip it.
    let text = err.to_string();
    let message = match text.rfind(" at line ") {
        Some(cut) => text[..cut].to_string(),
        None => text,
    };
    match err.classify() {
        Category::Data => FormatError::Schema {
            line,
            column,
            message,
        },
        Category::Syntax | Category::Eof | Category::Io => FormatError::Syntax {
            line,
            column,
            message,
        },
    }
}

// ---------------------------------------------------------------------------
// Models

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    activities: Vec<String>,
    classes: Vec<String>,
    #[serde(default)]
    relationships: Vec<RelationshipDoc>,
    #[serde(default)]
    aoc: Vec<AocDoc>,
    #[serde(default)]
    constraints: Vec<ConstraintDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationshipDoc {
    id: String,
    source: String,
    target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    card_src_always: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    card_src_eventually: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    card_tar_always: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    card_tar_eventually: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AocDoc {
    activity: String,
    class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    card_act_always: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    card_act_eventually: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    card_obj: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    id: String,
    #[serde(rename = "type")]
    ctype: TypeDoc,
    #[serde(rename = "ref")]
    reference: String,
    target: String,
    via: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pair: Option<TypeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TypeDoc {
    Template(String),
    Atoms(AtomsDoc),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    before: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    after: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sum: Option<String>,
}

fn card(text: Option<&String>, default: &Cardinality, context: impl FnOnce() -> String) -> Result<Cardinality, FormatError> {
    match text {
        None => Ok(default.clone()),
        Some(t) => t.parse().map_err(|source| FormatError::Cardinality {
            context: context(),
            source,
        }),
    }
}

fn constraint_type(doc: &TypeDoc, context: &str) -> Result<ConstraintType, FormatError> {
    let type_error = |source| FormatError::ConstraintType {
        context: context.to_string(),
        source,
    };
    match doc {
        TypeDoc::Template(name) => builtin_constraint_type(name).map_err(type_error),
        TypeDoc::Atoms(atoms) => {
            let atom = |text: &Option<String>, name: &str| -> Result<Option<Cardinality>, FormatError> {
                text.as_ref()
                    .map(|t| {
                        t.parse().map_err(|source| FormatError::Cardinality {
                            context: format!("{context} {name}"),
                            source,
                        })
                    })
                    .transpose()
            };
            ConstraintType::new(
                atom(&atoms.before, "before")?,
                atom(&atoms.after, "after")?,
                atom(&atoms.sum, "sum")?,
            )
            .map_err(type_error)
        }
    }
}

fn type_doc(ct: &ConstraintType) -> TypeDoc {
    match ct.template() {
        Some(t) => TypeDoc::Template(t.name().to_string()),
        None => TypeDoc::Atoms(AtomsDoc {
            before: ct.before().map(ToString::to_string),
            after: ct.after().map(ToString::to_string),
            sum: ct.sum().map(ToString::to_string),
        }),
    }
}

/// Parses a model document without rejecting ill-formed models.
///
/// Returns the model together with all of its defects, including duplicate
/// declarations, which the in-memory model cannot represent.
pub fn parse_model(bytes: &[u8]) -> Result<(OcbcModel, Vec<ModelDefect>), FormatError> {
    let doc: ModelDoc = serde_json::from_slice(bytes).map_err(|e| json_error(e, 0))?;
    let mut model = OcbcModel::default();
    let mut defects = Vec::new();
    let mut duplicate = |universe: Universe, name: &str, fresh: bool| {
        if !fresh {
            defects.push(ModelDefect::Duplicate {
                universe,
                name: name.to_string(),
            });
        }
    };

    for a in &doc.activities {
        duplicate(Universe::Activity, a, model.behavior.activities.insert(a.clone()));
    }
    for c in &doc.classes {
        duplicate(Universe::Class, c, model.class_model.classes.insert(c.clone()));
    }
    for r in &doc.relationships {
        let ctx = |field: &str| format!("relationship {} {field}", r.id);
        let any = Cardinality::any();
        let source_always = card(r.card_src_always.as_ref(), &any, || ctx("card_src_always"))?;
        let source_eventually = card(r.card_src_eventually.as_ref(), &source_always, || ctx("card_src_eventually"))?;
        let target_always = card(r.card_tar_always.as_ref(), &any, || ctx("card_tar_always"))?;
        let target_eventually = card(r.card_tar_eventually.as_ref(), &target_always, || ctx("card_tar_eventually"))?;
        let rel = RelationshipType {
            id: r.id.clone(),
            source: r.source.clone(),
            target: r.target.clone(),
            source_always,
            source_eventually,
            target_always,
            target_eventually,
        };
        duplicate(
            Universe::Relationship,
            &r.id,
            !model.class_model.relationships.contains_key(&r.id),
        );
        model.class_model.add_relationship(rel);
    }
    for l in &doc.aoc {
        let ctx = |field: &str| format!("link ({}, {}) {field}", l.activity, l.class);
        let any = Cardinality::any();
        let events_always = card(l.card_act_always.as_ref(), &any, || ctx("card_act_always"))?;
        let events_eventually = card(l.card_act_eventually.as_ref(), &events_always, || ctx("card_act_eventually"))?;
        let objects = card(l.card_obj.as_ref(), &any, || ctx("card_obj"))?;
        if model.has_link(&l.activity, &l.class) {
            defects.push(ModelDefect::Duplicate {
                universe: Universe::Activity,
                name: format!("link ({}, {})", l.activity, l.class),
            });
        }
        model.add_link(AocLink {
            activity: l.activity.clone(),
            class: l.class.clone(),
            events_always,
            events_eventually,
            objects,
        });
    }
    for c in &doc.constraints {
        let ctype = constraint_type(&c.ctype, &format!("constraint {}", c.id))?;
        let expanded = match &c.pair {
            None => vec![Constraint {
                id: c.id.clone(),
                reference: c.reference.clone(),
                target: c.target.clone(),
                ctype,
            }],
            Some(pair) => {
                let pair = constraint_type(pair, &format!("constraint {} pair", c.id))?;
                let (first, second) = expand_shorthand(&PairConstraint {
                    id: c.id.clone(),
                    reference: c.reference.clone(),
                    target: c.target.clone(),
                    ctype,
                    pair,
                });
                vec![first, second]
            }
        };
        for constraint in expanded {
            if model.behavior.constraints.contains_key(&constraint.id) {
                defects.push(ModelDefect::Duplicate {
                    universe: Universe::Constraint,
                    name: constraint.id.clone(),
                });
            }
            model.scope.insert(constraint.id.clone(), c.via.clone());
            model.behavior.add_constraint(constraint);
        }
    }
    defects.extend(model.validate());
    Ok((model, defects))
}

/// Parses and validates a model document; any defect is an error.
pub fn load_model(bytes: &[u8]) -> Result<OcbcModel, FormatError> {
    let (model, defects) = parse_model(bytes)?;
    if defects.is_empty() {
        Ok(model)
    } else {
        Err(FormatError::Defects(defects))
    }
}

/// Serializes a model with every cardinality written out.
pub fn save_model(model: &OcbcModel) -> String {
    let doc = ModelDoc {
        activities: model.behavior.activities.iter().cloned().collect(),
        classes: model.class_model.classes.iter().cloned().collect(),
        relationships: model
            .class_model
            .relationships
            .values()
            .map(|r| RelationshipDoc {
                id: r.id.clone(),
                source: r.source.clone(),
                target: r.target.clone(),
                card_src_always: Some(r.source_always.to_string()),
                card_src_eventually: Some(r.source_eventually.to_string()),
                card_tar_always: Some(r.target_always.to_string()),
                card_tar_eventually: Some(r.target_eventually.to_string()),
            })
            .collect(),
        aoc: model
            .links
            .values()
            .map(|l| AocDoc {
                activity: l.activity.clone(),
                class: l.class.clone(),
                card_act_always: Some(l.events_always.to_string()),
                card_act_eventually: Some(l.events_eventually.to_string()),
                card_obj: Some(l.objects.to_string()),
            })
            .collect(),
        constraints: model
            .behavior
            .constraints
            .values()
            .map(|c| ConstraintDoc {
                id: c.id.clone(),
                ctype: type_doc(&c.ctype),
                reference: c.reference.clone(),
                target: c.target.clone(),
                via: model.scope.get(&c.id).cloned().unwrap_or_default(),
                pair: None,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("model documents serialize");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// Logs

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: String,
    class: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    #[serde(default)]
    objects: Vec<ObjectDoc>,
    #[serde(default)]
    relations: Vec<Relation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitLine {
    init: SnapshotDoc,
}

#[derive(Debug, Serialize)]
struct InitLineOut<'a> {
    init: &'a SnapshotDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    id: String,
    seq: serde_json::Number,
    activity: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attrs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    objects: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    new_objects: Vec<ObjectDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    new_relations: Vec<Relation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    removed_relations: Vec<Relation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    assert_snapshot: Option<SnapshotDoc>,
}

fn snapshot_from_doc(doc: SnapshotDoc) -> Result<ObjectModel, DeltaError> {
    let mut om = ObjectModel::default();
    for o in doc.objects {
        if om.objects.insert(o.id.clone(), o.class).is_some() {
            return Err(DeltaError::DuplicateObject(o.id));
        }
    }
    om.relations = doc.relations.into_iter().collect();
    Ok(om)
}

fn snapshot_to_doc(om: &ObjectModel) -> SnapshotDoc {
    SnapshotDoc {
        objects: om
            .objects
            .iter()
            .map(|(id, class)| ObjectDoc {
                id: id.clone(),
                class: class.clone(),
            })
            .collect(),
        relations: om.relations.iter().cloned().collect(),
    }
}

/// Parses a log, rejecting any delta that does not apply.
pub fn load_log(bytes: &[u8]) -> Result<EventLog, FormatError> {
    load_log_with_warnings(bytes).map(|(log, _)| log)
}

/// Parses a log and also returns the non-fatal findings: references to
/// objects missing after their event, and asserted snapshots that differ
/// from the replayed object model.
pub fn load_log_with_warnings(bytes: &[u8]) -> Result<(EventLog, Vec<LogWarning>), FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let prefix = &bytes[..e.valid_up_to()];
        let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = prefix.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        FormatError::Syntax {
            line,
            column,
            message: "invalid UTF-8".into(),
        }
    })?;

    let mut init = ObjectModel::default();
    let mut events = Vec::new();
    let mut line_of_event: HashMap<String, usize> = HashMap::new();
    let mut line_of_seq: HashMap<u64, usize> = HashMap::new();
    let mut seen_content = false;

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| json_error(e, index))?;
        if value.get("init").is_some() {
            if !first {
                return Err(FormatError::MisplacedInit { line });
            }
            let doc: InitLine = serde_json::from_str(raw).map_err(|e| json_error(e, index))?;
            init = snapshot_from_doc(doc.init).map_err(|source| FormatError::Log {
                line,
                source: LogError::Init(source),
            })?;
            continue;
        }
        let doc: EventDoc = serde_json::from_str(raw).map_err(|e| json_error(e, index))?;
        let seq = doc
            .seq
            .as_u64()
            .filter(|&s| s >= 1)
            .ok_or(FormatError::SeqRange { line })?;
        if let Some(&first_line) = line_of_event.get(&doc.id) {
            return Err(FormatError::DuplicateEventId {
                line,
                id: doc.id,
                first_line,
            });
        }
        if let Some(&first_line) = line_of_seq.get(&seq) {
            return Err(FormatError::DuplicateSeq {
                line,
                seq,
                first_line,
            });
        }
        line_of_event.insert(doc.id.clone(), line);
        line_of_seq.insert(seq, line);
        let assert_snapshot = doc
            .assert_snapshot
            .map(snapshot_from_doc)
            .transpose()
            .map_err(|source| FormatError::Log {
                line,
                source: LogError::Snapshot {
                    event: doc.id.clone(),
                    source,
                },
            })?;
        events.push(Event {
            id: doc.id,
            seq,
            activity: doc.activity,
            attrs: doc.attrs,
            objects: doc.objects.into_iter().collect(),
            delta: ObjectDelta {
                new_objects: doc.new_objects.into_iter().map(|o| (o.id, o.class)).collect(),
                new_relations: doc.new_relations,
                removed_relations: doc.removed_relations,
            },
            assert_snapshot,
        });
    }

    EventLog::with_warnings(init, events).map_err(|source| {
        let line = match &source {
            LogError::Delta { event, .. } | LogError::Snapshot { event, .. } => {
                line_of_event.get(event).copied().unwrap_or(0)
            }
            LogError::Init(_) => 1,
            LogError::DuplicateSeq { second, .. } => line_of_event.get(second).copied().unwrap_or(0),
            LogError::DuplicateEventId(id) | LogError::ZeroSeq(id) | LogError::UnknownEvent(id) => {
                line_of_event.get(id).copied().unwrap_or(0)
            }
        };
        FormatError::Log { line, source }
    })
}

/// Serializes a log as JSON Lines: an init line when the initial object
/// model is non-empty, then one line per event in sequence order.
pub fn save_log(log: &EventLog) -> String {
    let mut out = String::new();
    if !log.init().is_empty() || !log.init().relations.is_empty() {
        let doc = snapshot_to_doc(log.init());
        out.push_str(&serde_json::to_string(&InitLineOut { init: &doc }).expect("serializable"));
        out.push('\n');
    }
    for e in log.events() {
        let doc = EventDoc {
            id: e.id.clone(),
            seq: e.seq.into(),
            activity: e.activity.clone(),
            attrs: e.attrs.clone(),
            objects: e.objects.iter().cloned().collect(),
            new_objects: e
                .delta
                .new_objects
                .iter()
                .map(|(id, class)| ObjectDoc {
                    id: id.clone(),
                    class: class.clone(),
                })
                .collect(),
            new_relations: e.delta.new_relations.clone(),
            removed_relations: e.delta.removed_relations.clone(),
            assert_snapshot: e.assert_snapshot.as_ref().map(snapshot_to_doc),
        };
        out.push_str(&serde_json::to_string(&doc).expect("serializable"));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Reports

/// Canonical report document: keys sorted, violations in report order.
pub fn save_report(report: &ConformanceReport) -> String {
    let value = serde_json::to_value(report).expect("reports serialize");
    let mut text = serde_json::to_string_pretty(&value).expect("values serialize");
    text.push('\n');
    text
}

pub fn load_report(bytes: &[u8]) -> Result<ConformanceReport, FormatError> {
    serde_json::from_slice(bytes).map_err(|e| json_error(e, 0))
}

//! Problems of the object models themselves: validity (I), fulfilment (II)
//! and monotonicity (III).

use std::collections::HashMap;

use crate::cardinality::Cardinality;
use crate::log::{Event, EventLog, ObjectModel, Relation, StepChanges};
use crate::model::{ClassModel, Modality, OcbcModel, RelationshipType, Side};

use super::{Episodes, Expected, Observed, ProblemKind, Subject, Violation};

/// Relationship ends whose cardinality is evaluated for objects of a class.
struct Anchors<'m> {
    by_class: HashMap<&'m str, Vec<(&'m RelationshipType, Side)>>,
}

impl<'m> Anchors<'m> {
    fn new(class_model: &'m ClassModel) -> Self {
        let mut by_class: HashMap<&str, Vec<_>> = HashMap::new();
        for rel in class_model.relationships.values() {
            for side in [Side::Source, Side::Target] {
                by_class
                    .entry(rel.anchor_class(side))
                    .or_default()
                    .push((rel, side));
            }
        }
        Self { by_class }
    }

    fn of(&self, class: &str) -> &[(&'m RelationshipType, Side)] {
        self.by_class.get(class).map_or(&[], Vec::as_slice)
    }
}

type CardKey = (String, Side, String);

/// The object a relation is counted for at `side`.
fn counted_object(r: &Relation, side: Side) -> &str {
    match side {
        Side::Source => &r.target,
        Side::Target => &r.source,
    }
}

/// Per-object relation counts keyed by `(rel_type, side, object)`.
#[derive(Default)]
struct Degrees {
    counts: HashMap<CardKey, u64>,
}

impl Degrees {
    fn of_model(om: &ObjectModel) -> Self {
        let mut d = Self::default();
        for r in &om.relations {
            d.add(r);
        }
        d
    }

    fn add(&mut self, r: &Relation) {
        for side in [Side::Source, Side::Target] {
            *self.counts.entry(key(r, side)).or_default() += 1;
        }
    }

    fn remove(&mut self, r: &Relation) {
        for side in [Side::Source, Side::Target] {
            let slot = self.counts.get_mut(&key(r, side)).expect("removed relation was counted");
            *slot -= 1;
        }
    }

    fn get(&self, key: &CardKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }
}

fn key(r: &Relation, side: Side) -> CardKey {
    (r.rel_type.clone(), side, counted_object(r, side).to_string())
}

/// Whether a step changed objects in a way deltas cannot (only possible with
/// asserted snapshots). Such steps are re-checked from scratch.
fn reshaped(changes: &StepChanges) -> bool {
    !changes.removed_objects.is_empty() || !changes.reclassified.is_empty()
}

fn card_violation(
    kind: ProblemKind,
    at: &Event,
    key: &CardKey,
    modality: Modality,
    expected: &Cardinality,
    count: u64,
) -> Violation {
    let (rel_type, side, object) = key;
    Violation::new(
        kind,
        at,
        Subject::ObjectCardinality {
            rel_type: rel_type.clone(),
            side: *side,
            object: object.clone(),
        },
    )
    .modality(modality)
    .expect_card(expected)
    .count(count)
}

fn typing_violation(
    class_model: &ClassModel,
    om: &ObjectModel,
    r: &Relation,
    at: &Event,
) -> Option<Violation> {
    if !om.relations.contains(r) {
        return None;
    }
    let source_class = om.class_of(&r.source).unwrap_or_default();
    let target_class = om.class_of(&r.target).unwrap_or_default();
    let rel = class_model.relationships.get(&r.rel_type);
    if rel.is_some_and(|rel| rel.source == source_class && rel.target == target_class) {
        return None;
    }
    let mut v = Violation::new(
        ProblemKind::I,
        at,
        Subject::RelationTyping {
            rel_type: r.rel_type.clone(),
            source: r.source.clone(),
            target: r.target.clone(),
        },
    );
    v.expected = rel.map(|rel| Expected::Classes {
        source_class: rel.source.clone(),
        target_class: rel.target.clone(),
    });
    v.observed = Some(Observed::Classes {
        source_class: source_class.to_string(),
        target_class: target_class.to_string(),
    });
    Some(v)
}

/// Type I: every snapshot must be valid for the class model, i.e. relations
/// are well typed and every always-cardinality holds.
///
/// A breach is reported at the first event whose snapshot exhibits it, and
/// again only if it is repaired and later reappears.
pub fn check_type_i(model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    let class_model = &model.class_model;
    let anchors = Anchors::new(class_model);
    let mut degrees = Degrees::of_model(log.init());
    let mut cards: Episodes<CardKey> = Episodes::default();
    let mut typing: Episodes<Relation> = Episodes::default();
    let mut out = Vec::new();
    let mut replay = log.replay();

    while let Some(step) = replay.advance() {
        let changes = &step.changes;
        for r in &changes.removed_relations {
            degrees.remove(r);
        }
        for r in &changes.added_relations {
            degrees.add(r);
        }
        let state = replay.state();

        let (card_keys, typing_keys): (Vec<CardKey>, Vec<Relation>) =
            if step.position == 0 || reshaped(changes) {
                let mut card_keys: Vec<CardKey> = cards.current().cloned().collect();
                for (object, class) in &state.objects {
                    for (rel, side) in anchors.of(class) {
                        card_keys.push((rel.id.clone(), *side, object.clone()));
                    }
                }
                let mut typing_keys: Vec<Relation> = typing.current().cloned().collect();
                typing_keys.extend(state.relations.iter().cloned());
                (card_keys, typing_keys)
            } else {
                let mut card_keys = Vec::new();
                for r in changes.added_relations.iter().chain(&changes.removed_relations) {
                    if class_model.relationships.contains_key(&r.rel_type) {
                        card_keys.push(key(r, Side::Source));
                        card_keys.push(key(r, Side::Target));
                    }
                }
                for object in &changes.added_objects {
                    let class = state.class_of(object).expect("added object exists");
                    for (rel, side) in anchors.of(class) {
                        card_keys.push((rel.id.clone(), *side, object.clone()));
                    }
                }
                let typing_keys = changes
                    .added_relations
                    .iter()
                    .chain(&changes.removed_relations)
                    .cloned()
                    .collect();
                (card_keys, typing_keys)
            };

        for k in card_keys {
            let rel = &class_model.relationships[&k.0];
            let always = rel.card(k.1, Modality::Always);
            let count = degrees.get(&k);
            let failing = state.class_of(&k.2) == Some(rel.anchor_class(k.1)) && !always.contains(count);
            if cards.observe(&k, failing) {
                out.push(card_violation(ProblemKind::I, step.event, &k, Modality::Always, always, count));
            }
        }
        for r in typing_keys {
            let breach = typing_violation(class_model, state, &r, step.event);
            if typing.observe(&r, breach.is_some()) {
                out.extend(breach);
            }
        }
    }
    out
}

/// Type II: the final snapshot must satisfy every eventually-cardinality.
pub fn check_type_ii(model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    let Some(last) = log.events().last() else {
        return Vec::new();
    };
    let anchors = Anchors::new(&model.class_model);
    let om = log.final_snapshot();
    let degrees = Degrees::of_model(&om);
    let mut out = Vec::new();
    for (object, class) in &om.objects {
        for (rel, side) in anchors.of(class) {
            let k = (rel.id.clone(), *side, object.clone());
            let eventually = rel.card(*side, Modality::Eventually);
            let count = degrees.get(&k);
            if !eventually.contains(count) {
                out.push(card_violation(ProblemKind::II, last, &k, Modality::Eventually, eventually, count));
            }
        }
    }
    out
}

/// Type III: objects never disappear and never change class between events.
///
/// A disappearance is reported at the first snapshot lacking an object that
/// the previous snapshot had. A class change is reported at the snapshot
/// whose class differs from the one in the latest earlier snapshot holding
/// the object.
pub fn check_type_iii(_model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    let mut last_class: HashMap<String, String> = HashMap::new();
    let mut out = Vec::new();
    let mut replay = log.replay();
    while let Some(step) = replay.advance() {
        let state = replay.state();
        if step.position == 0 {
            last_class.extend(state.objects.iter().map(|(o, c)| (o.clone(), c.clone())));
            continue;
        }
        let changes = &step.changes;
        for object in &changes.removed_objects {
            out.push(Violation::new(
                ProblemKind::III,
                step.event,
                Subject::Disappeared {
                    object: object.clone(),
                    class: last_class[object].clone(),
                },
            ));
        }
        let touched = changes
            .added_objects
            .iter()
            .chain(changes.reclassified.iter().map(|(o, _, _)| o));
        for object in touched {
            let class = state.class_of(object).expect("touched object exists");
            if let Some(previous) = last_class.insert(object.clone(), class.to_string()) {
                if previous != class {
                    out.push(Violation::new(
                        ProblemKind::III,
                        step.event,
                        Subject::ClassChanged {
                            object: object.clone(),
                            from: previous,
                            to: class.to_string(),
                        },
                    ));
                }
            }
        }
    }
    out
}

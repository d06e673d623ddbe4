//! Shared test helpers: fixture loading, a naive reference evaluator of the
//! conformance definition, and random model/log generators.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use ocbc::io::{load_log, load_model};
use ocbc::{
    parse_cardinality, Cardinality, Constraint, ConstraintType, Event, EventLog, EventRef, Expected,
    Modality, ObjectModel, Observed, OcbcModel, ProblemKind, Relation, RelationshipType, Severity,
    Side, Subject, Template, Violation,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap_or_else(|e| panic!("reading fixture {name}: {e}"))
}

pub fn model(name: &str) -> OcbcModel {
    load_model(&fixture_bytes(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn log(name: &str) -> EventLog {
    load_log(&fixture_bytes(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn card(text: &str) -> Cardinality {
    parse_cardinality(text).unwrap()
}

// ---------------------------------------------------------------------------
// Naive evaluator

/// The snapshots OM_e for every event position, computed by folding deltas
/// and asserted snapshots without going through the library's replay.
pub fn naive_snapshots(log: &EventLog) -> Vec<ObjectModel> {
    let mut state = log.init().clone();
    let mut out = Vec::with_capacity(log.len());
    for e in log.events() {
        for (o, c) in &e.delta.new_objects {
            state.objects.insert(o.clone(), c.clone());
        }
        for r in &e.delta.removed_relations {
            state.relations.remove(r);
        }
        for r in &e.delta.new_relations {
            state.relations.insert(r.clone());
        }
        if let Some(asserted) = &e.assert_snapshot {
            state = asserted.clone();
        }
        out.push(state.clone());
    }
    out
}

/// Number of objects `object` is related to through `rel` when counted at
/// `side`: at the source side the sources of `object`, at the target side
/// its targets.
fn degree(om: &ObjectModel, rel: &str, side: Side, object: &str) -> u64 {
    om.relations
        .iter()
        .filter(|r| {
            r.rel_type == rel
                && match side {
                    Side::Source => r.target == object,
                    Side::Target => r.source == object,
                }
        })
        .count() as u64
}

fn anchored(om: &ObjectModel, rel: &RelationshipType, side: Side, object: &str) -> bool {
    let class = match side {
        Side::Source => &rel.target,
        Side::Target => &rel.source,
    };
    om.class_of(object) == Some(class.as_str())
}

/// `∃ f ≥ from. ∀ e' ≥ f. holds(e')` over positions `0..n`.
fn eventually_always(from: usize, n: usize, holds: impl Fn(usize) -> bool) -> bool {
    (from..n).any(|f| (f..n).all(&holds))
}

fn violation(kind: ProblemKind, at: &Event, subject: Subject) -> Violation {
    Violation {
        kind,
        at_event: EventRef {
            seq: at.seq,
            id: at.id.clone(),
        },
        subject,
        modality: None,
        expected: None,
        observed: None,
        severity: Severity::Error,
    }
}

fn with_card(mut v: Violation, modality: Option<Modality>, expected: &Cardinality, count: u64) -> Violation {
    v.modality = modality;
    v.expected = Some(Expected::Cardinality {
        cardinality: expected.clone(),
    });
    v.observed = Some(Observed::Count { count });
    v
}

/// Reports every subject at the positions where its failure starts: failing
/// at `j` but not at `j - 1`.
fn onsets<K: Ord + Clone>(failing: &[BTreeMap<K, Violation>]) -> Vec<Violation> {
    let mut out = Vec::new();
    for (j, now) in failing.iter().enumerate() {
        for (k, v) in now {
            if j == 0 || !failing[j - 1].contains_key(k) {
                out.push(v.clone());
            }
        }
    }
    out
}

fn ix_targets(model: &OcbcModel, log: &EventLog, om: &ObjectModel, c: &Constraint, reference: &Event) -> Vec<usize> {
    let via = &model.scope[&c.id];
    let mut out = Vec::new();
    for (p, t) in log.events().iter().enumerate() {
        if t.activity != c.target {
            continue;
        }
        let correlated = if model.class_model.classes.contains(via) {
            om.objects
                .iter()
                .any(|(o, class)| class == via && reference.objects.contains(o) && t.objects.contains(o))
        } else {
            om.objects.keys().any(|o1| {
                om.objects.keys().any(|o2| {
                    let related = om.relations.contains(&Relation::new(via.clone(), o1.clone(), o2.clone()))
                        || om.relations.contains(&Relation::new(via.clone(), o2.clone(), o1.clone()));
                    related && reference.objects.contains(o1) && t.objects.contains(o2)
                })
            })
        };
        if correlated {
            out.push(p);
        }
    }
    out
}

/// Every violation the conformance definition implies, evaluated with its
/// quantifiers spelled out. The records follow the library's reporting
/// convention: episode onsets for always-conditions, the last event for
/// eventually-conditions, and no eventually record for an events-per-object
/// count that also breaks its always-cardinality.
pub fn naive_check(model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    let events = log.events();
    let n = events.len();
    let om = naive_snapshots(log);
    let cm = &model.class_model;
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let last = &events[n - 1];

    // I
    let mut failing_i: Vec<BTreeMap<Subject, Violation>> = Vec::new();
    for (j, e) in events.iter().enumerate() {
        let s = &om[j];
        let mut now = BTreeMap::new();
        for r in &s.relations {
            let src = s.class_of(&r.source).unwrap_or_default().to_string();
            let tgt = s.class_of(&r.target).unwrap_or_default().to_string();
            let rel = cm.relationships.get(&r.rel_type);
            if rel.is_some_and(|rel| rel.source == src && rel.target == tgt) {
                continue;
            }
            let subject = Subject::RelationTyping {
                rel_type: r.rel_type.clone(),
                source: r.source.clone(),
                target: r.target.clone(),
            };
            let mut v = violation(ProblemKind::I, e, subject.clone());
            v.expected = rel.map(|rel| Expected::Classes {
                source_class: rel.source.clone(),
                target_class: rel.target.clone(),
            });
            v.observed = Some(Observed::Classes {
                source_class: src,
                target_class: tgt,
            });
            now.insert(subject, v);
        }
        for rel in cm.relationships.values() {
            for side in [Side::Source, Side::Target] {
                for o in s.objects.keys() {
                    if !anchored(s, rel, side, o) {
                        continue;
                    }
                    let count = degree(s, &rel.id, side, o);
                    let always = rel.card(side, Modality::Always);
                    if !always.contains(count) {
                        let subject = Subject::ObjectCardinality {
                            rel_type: rel.id.clone(),
                            side,
                            object: o.clone(),
                        };
                        let v = with_card(violation(ProblemKind::I, e, subject.clone()), Some(Modality::Always), always, count);
                        now.insert(subject, v);
                    }
                }
            }
        }
        failing_i.push(now);
    }
    out.extend(onsets(&failing_i));

    // II: ∃ e_f ∀ e' ⪰ e_f, per object and relationship end.
    let ever: BTreeSet<&String> = om.iter().flat_map(|s| s.objects.keys()).collect();
    for rel in cm.relationships.values() {
        for side in [Side::Source, Side::Target] {
            let eventually = rel.card(side, Modality::Eventually);
            for &o in &ever {
                let ok = eventually_always(0, n, |p| {
                    !anchored(&om[p], rel, side, o) || eventually.contains(degree(&om[p], &rel.id, side, o))
                });
                if !ok {
                    let subject = Subject::ObjectCardinality {
                        rel_type: rel.id.clone(),
                        side,
                        object: o.clone(),
                    };
                    let count = degree(&om[n - 1], &rel.id, side, o);
                    out.push(with_card(violation(ProblemKind::II, last, subject), Some(Modality::Eventually), eventually, count));
                }
            }
        }
    }

    // III
    for j in 1..n {
        let (prev, now) = (&om[j - 1], &om[j]);
        for (o, class) in &prev.objects {
            if !now.contains(o) {
                out.push(violation(
                    ProblemKind::III,
                    &events[j],
                    Subject::Disappeared {
                        object: o.clone(),
                        class: class.clone(),
                    },
                ));
            }
        }
        for (o, class) in &now.objects {
            let earlier = (0..j).rev().find_map(|i| om[i].class_of(o));
            if let Some(from) = earlier.filter(|from| from != class) {
                out.push(violation(
                    ProblemKind::III,
                    &events[j],
                    Subject::ClassChanged {
                        object: o.clone(),
                        from: from.to_string(),
                        to: class.clone(),
                    },
                ));
            }
        }
    }
    // The records above are complete iff the pairwise definition holds.
    let pairwise_ok = (0..n).all(|a| {
        (a + 1..n).all(|b| {
            om[a]
                .objects
                .iter()
                .all(|(o, c)| om[b].class_of(o) == Some(c.as_str()))
        })
    });
    let iii_found = out.iter().any(|v| v.kind == ProblemKind::III);
    assert_eq!(pairwise_ok, !iii_found, "Type III records disagree with the pairwise definition");

    // IV, V, VI
    for (j, e) in events.iter().enumerate() {
        if !model.behavior.activities.contains(&e.activity) {
            out.push(violation(
                ProblemKind::IV,
                e,
                Subject::UnknownActivity {
                    event: e.id.clone(),
                    activity: e.activity.clone(),
                },
            ));
        }
        for o in &e.objects {
            match om[j].class_of(o) {
                None => out.push(violation(
                    ProblemKind::V,
                    e,
                    Subject::MissingObject {
                        event: e.id.clone(),
                        object: o.clone(),
                    },
                )),
                Some(class) if !model.has_link(&e.activity, class) => out.push(violation(
                    ProblemKind::VI,
                    e,
                    Subject::ImproperClass {
                        event: e.id.clone(),
                        object: o.clone(),
                        class: class.to_string(),
                    },
                )),
                Some(_) => {}
            }
        }
    }

    // VII: |{e'' ∈ ∂_a(before-incl e') | (e'', o) ∈ EO}| for e ⪯ e' with
    // o ∈ ∂_oc(Obj_e).
    let count_upto = |activity: &str, o: &str, p: usize| -> u64 {
        events[..=p]
            .iter()
            .filter(|e| e.activity == activity && e.objects.contains(o))
            .count() as u64
    };
    let mut failing_vii: Vec<BTreeMap<Subject, Violation>> = vec![BTreeMap::new(); n];
    for link in model.links.values() {
        for &o in &ever {
            let subject = Subject::EventsPerObject {
                activity: link.activity.clone(),
                class: link.class.clone(),
                object: o.clone(),
            };
            let starts: Vec<usize> = (0..n)
                .filter(|&p| om[p].class_of(o) == Some(link.class.as_str()))
                .collect();
            for p in 0..n {
                let count = count_upto(&link.activity, o, p);
                let constrained = starts.iter().any(|&e| e <= p);
                if constrained && !link.events_always.contains(count) {
                    let v = with_card(
                        violation(ProblemKind::VII, &events[p], subject.clone()),
                        Some(Modality::Always),
                        &link.events_always,
                        count,
                    );
                    failing_vii[p].insert(subject.clone(), v);
                }
            }
            let eventually_fails = starts.iter().any(|&e| {
                !eventually_always(e, n, |p| link.events_eventually.contains(count_upto(&link.activity, o, p)))
            });
            let final_count = count_upto(&link.activity, o, n - 1);
            if eventually_fails && link.events_always.contains(final_count) {
                out.push(with_card(
                    violation(ProblemKind::VII, last, subject),
                    Some(Modality::Eventually),
                    &link.events_eventually,
                    final_count,
                ));
            }
        }
    }
    out.extend(onsets(&failing_vii));

    // VIII
    for (j, e) in events.iter().enumerate() {
        for link in model.links.values().filter(|l| l.activity == e.activity) {
            let count = e
                .objects
                .iter()
                .filter(|o| om[j].class_of(o) == Some(link.class.as_str()))
                .count() as u64;
            if !link.objects.contains(count) {
                let subject = Subject::ObjectsPerEvent {
                    activity: link.activity.clone(),
                    class: link.class.clone(),
                    event: e.id.clone(),
                };
                out.push(with_card(violation(ProblemKind::VIII, e, subject), None, &link.objects, count));
            }
        }
    }

    // IX: ∃ e_f ∀ e' ⪰ e_f with E_tar correlated through OM_{e'}.
    for c in model.behavior.constraints.values() {
        if !model.scope.contains_key(&c.id) {
            continue;
        }
        for (r, reference) in events.iter().enumerate() {
            if reference.activity != c.reference {
                continue;
            }
            let counts = |p: usize| {
                let targets = ix_targets(model, log, &om[p], c, reference);
                let before = targets.iter().filter(|&&t| t < r).count() as u64;
                let after = targets.iter().filter(|&&t| t > r).count() as u64;
                (before, after)
            };
            if !eventually_always(0, n, |p| {
                let (b, a) = counts(p);
                c.ctype.accepts(b, a)
            }) {
                let (before, after) = counts(n - 1);
                let mut v = violation(
                    ProblemKind::IX,
                    reference,
                    Subject::ConstraintAtEvent {
                        constraint: c.id.clone(),
                        event: reference.id.clone(),
                    },
                );
                v.expected = Some(Expected::ConstraintType {
                    constraint_type: c.ctype.clone(),
                });
                v.observed = Some(Observed::BeforeAfter { before, after });
                out.push(v);
            }
        }
    }

    out.sort();
    out
}

// ---------------------------------------------------------------------------
// Random models and logs

const CARDS: [&str; 9] = ["*", "0", "1", "0..1", "1..*", "0..2", "2", "1..2", "0,2..*"];

pub fn random_card(rng: &mut ChaCha8Rng) -> Cardinality {
    card(CARDS.choose(rng).unwrap())
}

/// A random cardinality contained in `outer`; often `outer` itself.
pub fn random_subset(rng: &mut ChaCha8Rng, outer: &Cardinality) -> Cardinality {
    if rng.gen_bool(0.5) {
        return outer.clone();
    }
    let candidates: Vec<Cardinality> = CARDS.iter().map(|t| card(t)).filter(|c| c.is_subset_of(outer)).collect();
    candidates.choose(rng).cloned().unwrap_or_else(|| outer.clone())
}

pub fn random_ctype(rng: &mut ChaCha8Rng) -> ConstraintType {
    if rng.gen_bool(0.7) {
        return Template::ALL.choose(rng).unwrap().constraint_type();
    }
    loop {
        let mut atom = || rng.gen_bool(0.5).then(|| random_card(rng));
        let (b, a, s) = (atom(), atom(), atom());
        if let Ok(t) = ConstraintType::new(b, a, s) {
            return t;
        }
    }
}

/// A well-formed model with up to 4 activities, 3 classes, 3 relationship
/// types and 4 constraints.
pub fn random_model(rng: &mut ChaCha8Rng) -> OcbcModel {
    let mut m = OcbcModel::default();
    let activities: Vec<String> = (0..rng.gen_range(1..=4)).map(|i| format!("a{i}")).collect();
    let classes: Vec<String> = (0..rng.gen_range(1..=3)).map(|i| format!("C{i}")).collect();
    for a in &activities {
        m.behavior.add_activity(a.clone());
    }
    for c in &classes {
        m.class_model.add_class(c.clone());
    }
    for i in 0..rng.gen_range(0..=3) {
        let mut rel = RelationshipType::new(
            format!("r{i}"),
            classes.choose(rng).unwrap().clone(),
            classes.choose(rng).unwrap().clone(),
        );
        rel.source_always = random_card(rng);
        rel.source_eventually = random_subset(rng, &rel.source_always);
        rel.target_always = random_card(rng);
        rel.target_eventually = random_subset(rng, &rel.target_always);
        m.class_model.add_relationship(rel);
    }
    for a in &activities {
        for c in &classes {
            if rng.gen_bool(0.6) {
                let mut link = ocbc::AocLink::new(a.clone(), c.clone());
                link.events_always = random_card(rng);
                link.events_eventually = random_subset(rng, &link.events_always);
                link.objects = random_card(rng);
                m.add_link(link);
            }
        }
    }
    for i in 0..rng.gen_range(0..=4) {
        let reference = activities.choose(rng).unwrap().clone();
        let target = activities.choose(rng).unwrap().clone();
        let mut scopes: Vec<String> = classes
            .iter()
            .filter(|c| m.has_link(&reference, c) && m.has_link(&target, c))
            .cloned()
            .collect();
        for rel in m.class_model.relationships.values() {
            let forward = m.has_link(&reference, &rel.source) && m.has_link(&target, &rel.target);
            let backward = m.has_link(&reference, &rel.target) && m.has_link(&target, &rel.source);
            if forward || backward {
                scopes.push(rel.id.clone());
            }
        }
        let Some(via) = scopes.choose(rng).cloned() else {
            continue;
        };
        let id = format!("c{i}");
        m.scope.insert(id.clone(), via);
        m.behavior.add_constraint(Constraint {
            id,
            reference,
            target,
            ctype: random_ctype(rng),
        });
    }
    assert!(m.validate().is_empty(), "random model is well-formed: {:?}", m.validate());
    m
}

fn random_relation(rng: &mut ChaCha8Rng, model: &OcbcModel, objects: &[String]) -> Option<Relation> {
    let rel = model.class_model.relationships.keys().cloned().collect::<Vec<_>>();
    let rel_type = if rel.is_empty() || rng.gen_bool(0.05) {
        "undeclared".to_string()
    } else {
        rel.choose(rng).unwrap().clone()
    };
    Some(Relation::new(rel_type, objects.choose(rng)?.clone(), objects.choose(rng)?.clone()))
}

/// A random log over at most 12 objects and 15 events that builds without
/// errors. It exercises every problem kind: undeclared activities, dangling
/// references, badly typed relations and asserted snapshots that drop or
/// reclassify objects.
pub fn random_log(rng: &mut ChaCha8Rng, model: &OcbcModel) -> EventLog {
    let mut classes: Vec<String> = model.class_model.classes.iter().cloned().collect();
    classes.push("Stray".into());
    let pool: Vec<String> = (0..12).map(|i| format!("o{i}")).collect();
    let mut activities: Vec<String> = model.behavior.activities.iter().cloned().collect();
    activities.push("zz".into());

    let mut state = ObjectModel::default();
    for o in &pool[..rng.gen_range(0..=4)] {
        let class = if rng.gen_bool(0.9) {
            classes[..classes.len() - 1].choose(rng).unwrap()
        } else {
            classes.last().unwrap()
        };
        state.objects.insert(o.clone(), class.clone());
    }
    let existing: Vec<String> = state.objects.keys().cloned().collect();
    for _ in 0..rng.gen_range(0..=3) {
        if let Some(r) = random_relation(rng, model, &existing) {
            state.relations.insert(r);
        }
    }
    let init = state.clone();

    let mut events = Vec::new();
    for i in 0..rng.gen_range(0..=15) {
        let activity = if rng.gen_bool(0.95) {
            activities[..activities.len() - 1].choose(rng).unwrap().clone()
        } else {
            activities.last().unwrap().clone()
        };
        let mut e = Event::new(format!("e{i}"), (i + 1) as u64, activity);
        let fresh: Vec<&String> = pool.iter().filter(|o| !state.contains(o)).collect();
        for _ in 0..rng.gen_range(0..=2) {
            if let Some(&o) = fresh.choose(rng) {
                if !e.delta.new_objects.iter().any(|(id, _)| id == o) {
                    let class = if rng.gen_bool(0.95) {
                        classes[..classes.len() - 1].choose(rng).unwrap()
                    } else {
                        classes.last().unwrap()
                    };
                    e.delta.new_objects.push((o.clone(), class.clone()));
                }
            }
        }
        let mut after = state.clone();
        for (o, c) in &e.delta.new_objects {
            after.objects.insert(o.clone(), c.clone());
        }
        if rng.gen_bool(0.3) {
            if let Some(r) = state.relations.iter().cloned().collect::<Vec<_>>().choose(rng) {
                e.delta.removed_relations.push(r.clone());
                after.relations.remove(r);
            }
        }
        let known: Vec<String> = after.objects.keys().cloned().collect();
        for _ in 0..rng.gen_range(0..=2) {
            if let Some(r) = random_relation(rng, model, &known) {
                if !e.delta.new_relations.contains(&r) {
                    after.relations.insert(r.clone());
                    e.delta.new_relations.push(r);
                }
            }
        }
        if rng.gen_bool(0.08) {
            let mut asserted = after.clone();
            if let Some(o) = known.choose(rng) {
                if rng.gen_bool(0.5) {
                    asserted.objects.remove(o);
                    asserted.relations.retain(|r| &r.source != o && &r.target != o);
                } else {
                    asserted.objects.insert(o.clone(), classes.choose(rng).unwrap().clone());
                }
            }
            after = asserted.clone();
            e.assert_snapshot = Some(asserted);
        }
        let referable: Vec<String> = if rng.gen_bool(0.9) { known.clone() } else { pool.clone() };
        for _ in 0..rng.gen_range(0..=3) {
            if let Some(o) = referable.choose(rng) {
                e.objects.insert(o.clone());
            }
        }
        state = after;
        events.push(e);
    }
    EventLog::new(init, events).expect("random logs are built from applicable deltas")
}

/// The log made of the first `n` events of `log`.
pub fn prefix(log: &EventLog, n: usize) -> EventLog {
    EventLog::new(log.init().clone(), log.events()[..n].to_vec()).unwrap()
}

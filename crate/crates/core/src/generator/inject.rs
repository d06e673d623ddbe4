//! Single-violation mutations of a log.
//!
//! Each problem kind has a family of random mutations. A mutation is kept
//! only if the checker reports a violation of that kind which the original
//! log did not have, so the returned descriptor is always confirmed.

use std::collections::BTreeSet;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conformance::{check_all, EventRef, ProblemKind, Subject};
use crate::log::{Event, EventLog, ObjectModel, Relation};
use crate::model::OcbcModel;

const TRIES: usize = 400;

/// The violation an injection is expected to produce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub kind: ProblemKind,
    pub at_event: EventRef,
    pub subject: Subject,
    /// The event the mutation touched, or that it inserted.
    pub site: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InjectError {
    #[error("no type {0} violation could be injected into this log")]
    NotInjectable(ProblemKind),
}

/// Mutates `log` so that the checker reports a new violation of `kind`.
///
/// Other kinds may be affected as a side effect; removing a relation, for
/// instance, also changes how events are correlated.
pub fn inject_violation(
    model: &OcbcModel,
    log: &EventLog,
    kind: ProblemKind,
    seed: u64,
) -> Result<(EventLog, Injection), InjectError> {
    if log.is_empty() {
        return Err(InjectError::NotInjectable(kind));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let known: BTreeSet<Subject> = check_all(model, log).of_kind(kind).map(|v| v.subject.clone()).collect();
    for _ in 0..TRIES {
        let Some((events, site)) = mutate(model, log, kind, &mut rng) else {
            continue;
        };
        let Ok(mutant) = EventLog::new(log.init().clone(), events) else {
            continue;
        };
        let report = check_all(model, &mutant);
        let fresh: Vec<_> = report.of_kind(kind).filter(|v| !known.contains(&v.subject)).collect();
        let chosen = fresh
            .iter()
            .find(|v| v.at_event.id == site)
            .or_else(|| fresh.first());
        if let Some(v) = chosen {
            let injection = Injection {
                kind,
                at_event: v.at_event.clone(),
                subject: v.subject.clone(),
                site,
            };
            return Ok((mutant, injection));
        }
    }
    Err(InjectError::NotInjectable(kind))
}

/// One random mutation for `kind`: the new event list and the site.
fn mutate(model: &OcbcModel, log: &EventLog, kind: ProblemKind, rng: &mut ChaCha8Rng) -> Option<(Vec<Event>, String)> {
    let mut events = log.events().to_vec();
    let p = rng.gen_range(0..events.len());
    let last = events.len() - 1;
    match kind {
        ProblemKind::I => {
            if rng.gen_bool(0.5) {
                add_relation(model, log, &mut events, p, rng)
            } else {
                remove_relation(log, &mut events, p, rng)
            }
        }
        ProblemKind::II => {
            if rng.gen_bool(0.5) {
                add_relation(model, log, &mut events, last, rng)
            } else {
                remove_relation(log, &mut events, last, rng)
            }
        }
        ProblemKind::III => {
            if p == 0 {
                return None;
            }
            let mut snapshot = log.snapshot_after(&events[p].id).ok()?;
            let object = log
                .snapshot_after(&events[p - 1].id)
                .ok()?
                .objects
                .into_keys()
                .choose(rng)?;
            if rng.gen_bool(0.5) {
                snapshot.objects.remove(&object);
                snapshot
                    .relations
                    .retain(|r| r.source != object && r.target != object);
            } else {
                let class = snapshot.objects.get(&object)?.clone();
                let other = model.class_model.classes.iter().filter(|c| **c != class).choose(rng)?;
                snapshot.objects.insert(object, other.clone());
            }
            events[p].assert_snapshot = Some(snapshot);
            Some(site(&events, p))
        }
        ProblemKind::IV => {
            let mut name = String::from("undeclared activity");
            while model.behavior.activities.contains(&name) {
                name.push('_');
            }
            events[p].activity = name;
            Some(site(&events, p))
        }
        ProblemKind::V => {
            let mut ghost = String::from("ghost object");
            while mentioned(log, &ghost) {
                ghost.push('_');
            }
            events[p].objects.insert(ghost);
            Some(site(&events, p))
        }
        ProblemKind::VI => {
            let snapshot = log.snapshot_after(&events[p].id).ok()?;
            let activity = events[p].activity.clone();
            let object = snapshot
                .objects
                .iter()
                .filter(|(o, c)| !model.has_link(&activity, c) && !events[p].objects.contains(*o))
                .map(|(o, _)| o.clone())
                .choose(rng)?;
            events[p].objects.insert(object);
            Some(site(&events, p))
        }
        ProblemKind::VII => {
            let object = events[p].objects.iter().choose(rng)?.clone();
            if rng.gen_bool(0.5) {
                let mut copy = events[p].clone();
                copy.id = fresh_event_id(log, &events[p].id);
                copy.seq = events[last].seq.checked_add(1)?;
                copy.objects = BTreeSet::from([object]);
                copy.delta = Default::default();
                copy.assert_snapshot = None;
                events.push(copy);
                Some(site(&events, events.len() - 1))
            } else {
                events[p].objects.remove(&object);
                Some(site(&events, last))
            }
        }
        ProblemKind::VIII => {
            let snapshot = log.snapshot_after(&events[p].id).ok()?;
            let activity = events[p].activity.clone();
            let link = model
                .links
                .values()
                .filter(|l| l.activity == activity && !l.objects.is_any())
                .choose(rng)?;
            let of_class: Vec<String> = snapshot.objects_of_class(&link.class).map(str::to_string).collect();
            if rng.gen_bool(0.5) {
                events[p].objects.retain(|o| !of_class.contains(o));
            } else {
                let extra = of_class.iter().filter(|o| !events[p].objects.contains(*o)).choose(rng)?;
                events[p].objects.insert(extra.clone());
            }
            Some(site(&events, p))
        }
        ProblemKind::IX => {
            let quiet = |e: &Event| e.delta.is_empty() && e.assert_snapshot.is_none();
            match rng.gen_range(0..3) {
                0 => {
                    if !quiet(&events[p]) {
                        return None;
                    }
                    events.remove(p);
                    let at = events.get(p).or(events.last())?.id.clone();
                    Some((events, at))
                }
                1 => {
                    if !quiet(&events[p]) {
                        return None;
                    }
                    let mut copy = events[p].clone();
                    copy.id = fresh_event_id(log, &events[p].id);
                    let at = if rng.gen_bool(0.5) {
                        events.push(copy);
                        events.len() - 1
                    } else {
                        events.insert(p, copy);
                        p
                    };
                    renumber(&mut events);
                    Some(site(&events, at))
                }
                _ => {
                    let q = rng.gen_range(0..events.len());
                    if p == q || !quiet(&events[p]) {
                        return None;
                    }
                    let moved = events.remove(p);
                    events.insert(q, moved);
                    renumber(&mut events);
                    Some(site(&events, q))
                }
            }
        }
    }
}

fn site(events: &[Event], p: usize) -> (Vec<Event>, String) {
    let id = events[p].id.clone();
    (events.to_vec(), id)
}

/// Sequence numbers 1, 2, ... in the current order.
fn renumber(events: &mut [Event]) {
    for (i, e) in events.iter_mut().enumerate() {
        e.seq = i as u64 + 1;
    }
}

fn fresh_event_id(log: &EventLog, base: &str) -> String {
    let mut n = 2;
    loop {
        let id = format!("{base}-{n}");
        if log.event(&id).is_none() {
            return id;
        }
        n += 1;
    }
}

fn mentioned(log: &EventLog, object: &str) -> bool {
    let in_model = |om: &ObjectModel| om.contains(object);
    in_model(log.init())
        || log.events().iter().any(|e| {
            e.objects.contains(object)
                || e.delta.new_objects.iter().any(|(o, _)| o == object)
                || e.assert_snapshot.as_ref().is_some_and(in_model)
        })
}

/// Adds a relation between two objects existing before event `p`, so that
/// one end gets more partners than before.
fn add_relation(
    model: &OcbcModel,
    log: &EventLog,
    events: &mut [Event],
    p: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<Event>, String)> {
    let before = if p == 0 {
        log.init().clone()
    } else {
        log.snapshot_after(&events[p - 1].id).ok()?
    };
    let rel = model.class_model.relationships.values().choose(rng)?;
    let source = before.objects_of_class(&rel.source).choose(rng)?.to_string();
    let target = before.objects_of_class(&rel.target).choose(rng)?.to_string();
    let relation = Relation::new(rel.id.clone(), source, target);
    if before.relations.contains(&relation) {
        return None;
    }
    events[p].delta.new_relations.push(relation);
    Some(site(events, p))
}

/// Removes a relation present before event `p` in the delta of `p`.
fn remove_relation(
    log: &EventLog,
    events: &mut [Event],
    p: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<Event>, String)> {
    let before = if p == 0 {
        log.init().clone()
    } else {
        log.snapshot_after(&events[p - 1].id).ok()?
    };
    let relation = before.relations.iter().choose(rng)?.clone();
    if events[p].delta.new_relations.contains(&relation) {
        return None;
    }
    events[p].delta.removed_relations.push(relation);
    Some(site(events, p))
}

//! Problems in how events refer to activities and objects: kinds IV to VIII.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::log::EventLog;
use crate::model::{AocLink, Modality, OcbcModel};

use super::{Episodes, ProblemKind, Subject, Violation};

/// Links grouped by activity and by class.
struct LinkIndex<'m> {
    by_activity: HashMap<&'m str, Vec<&'m AocLink>>,
    by_class: HashMap<&'m str, Vec<&'m AocLink>>,
    pairs: HashSet<(&'m str, &'m str)>,
}

impl<'m> LinkIndex<'m> {
    fn new(model: &'m OcbcModel) -> Self {
        let mut by_activity: HashMap<&str, Vec<_>> = HashMap::new();
        let mut by_class: HashMap<&str, Vec<_>> = HashMap::new();
        let mut pairs = HashSet::new();
        for link in model.links.values() {
            by_activity.entry(&link.activity).or_default().push(link);
            by_class.entry(&link.class).or_default().push(link);
            pairs.insert((link.activity.as_str(), link.class.as_str()));
        }
        Self {
            by_activity,
            by_class,
            pairs,
        }
    }

    fn of_activity(&self, activity: &str) -> &[&'m AocLink] {
        self.by_activity.get(activity).map_or(&[], Vec::as_slice)
    }

    fn of_class(&self, class: &str) -> &[&'m AocLink] {
        self.by_class.get(class).map_or(&[], Vec::as_slice)
    }

    fn linked(&self, activity: &str, class: &str) -> bool {
        self.pairs.contains(&(activity, class))
    }
}

/// Type IV: every event's activity is declared in the model.
pub fn check_type_iv(model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    log.events()
        .iter()
        .filter(|e| !model.behavior.activities.contains(&e.activity))
        .map(|e| {
            Violation::new(
                ProblemKind::IV,
                e,
                Subject::UnknownActivity {
                    event: e.id.clone(),
                    activity: e.activity.clone(),
                },
            )
        })
        .collect()
}

/// Type V: every object an event refers to exists in the snapshot directly
/// after that event.
pub fn check_type_v(_model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut replay = log.replay();
    while let Some(step) = replay.advance() {
        for object in &step.event.objects {
            if !replay.state().contains(object) {
                out.push(Violation::new(
                    ProblemKind::V,
                    step.event,
                    Subject::MissingObject {
                        event: step.event.id.clone(),
                        object: object.clone(),
                    },
                ));
            }
        }
    }
    out
}

/// Type VI: events only refer to objects of classes linked to their
/// activity. References to missing objects are left to type V.
pub fn check_type_vi(model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    let links = LinkIndex::new(model);
    let mut out = Vec::new();
    let mut replay = log.replay();
    while let Some(step) = replay.advance() {
        let e = step.event;
        for object in &e.objects {
            let Some(class) = replay.state().class_of(object) else {
                continue;
            };
            if !links.linked(&e.activity, class) {
                out.push(Violation::new(
                    ProblemKind::VI,
                    e,
                    Subject::ImproperClass {
                        event: e.id.clone(),
                        object: object.clone(),
                        class: class.to_string(),
                    },
                ));
            }
        }
    }
    out
}

/// `(activity, class, object)`
type EpoKey = (String, String, String);

/// Type VII: every object has the right number of events of each linked
/// activity.
///
/// An object is tracked for a link `(a, oc)` from the first snapshot in which
/// it has class `oc`. From then on the number of `a` events referring to it so
/// far must stay within the always-cardinality; breaches are reported once
/// per episode. At the end of the log the final count must lie within the
/// eventually-cardinality. That last check is only reported when the count
/// does satisfy the always-cardinality, since otherwise the always breach
/// at the last event already covers it.
pub fn check_type_vii(model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    let links = LinkIndex::new(model);
    let mut counts: HashMap<(String, String), u64> = HashMap::new();
    let mut tracked: HashMap<String, BTreeSet<String>> = HashMap::new();
    let mut episodes: Episodes<EpoKey> = Episodes::default();
    let mut out = Vec::new();
    let mut replay = log.replay();

    let count_of = |counts: &HashMap<(String, String), u64>, activity: &str, object: &str| {
        counts
            .get(&(activity.to_string(), object.to_string()))
            .copied()
            .unwrap_or(0)
    };

    while let Some(step) = replay.advance() {
        let e = step.event;
        let state = replay.state();
        for object in &e.objects {
            *counts.entry((e.activity.clone(), object.clone())).or_default() += 1;
        }

        let mut dirty: Vec<EpoKey> = Vec::new();
        let newly_classified: Vec<&String> = if step.position == 0 {
            state.objects.keys().collect()
        } else {
            step.changes
                .added_objects
                .iter()
                .chain(step.changes.reclassified.iter().map(|(o, _, _)| o))
                .collect()
        };
        for object in newly_classified {
            let class = state.class_of(object).expect("object is in the snapshot");
            if tracked.entry(object.clone()).or_default().insert(class.to_string()) {
                for link in links.of_class(class) {
                    dirty.push((link.activity.clone(), class.to_string(), object.clone()));
                }
            }
        }
        for object in &e.objects {
            if let Some(classes) = tracked.get(object) {
                for class in classes {
                    if links.linked(&e.activity, class) {
                        dirty.push((e.activity.clone(), class.clone(), object.clone()));
                    }
                }
            }
        }

        for key in dirty {
            let link = model.link(&key.0, &key.1).expect("key built from a link");
            let count = count_of(&counts, &key.0, &key.2);
            if episodes.observe(&key, !link.events_always.contains(count)) {
                out.push(epo_violation(step.event, &key, Modality::Always, &link.events_always, count));
            }
        }
    }

    if let Some(last) = log.events().last() {
        for (object, classes) in &tracked {
            for class in classes {
                for link in links.of_class(class) {
                    let count = count_of(&counts, &link.activity, object);
                    if !link.events_eventually.contains(count) && link.events_always.contains(count) {
                        let key = (link.activity.clone(), class.clone(), object.clone());
                        out.push(epo_violation(last, &key, Modality::Eventually, &link.events_eventually, count));
                    }
                }
            }
        }
    }
    out
}

fn epo_violation(
    at: &crate::log::Event,
    key: &EpoKey,
    modality: Modality,
    expected: &crate::cardinality::Cardinality,
    count: u64,
) -> Violation {
    let (activity, class, object) = key;
    Violation::new(
        ProblemKind::VII,
        at,
        Subject::EventsPerObject {
            activity: activity.clone(),
            class: class.clone(),
            object: object.clone(),
        },
    )
    .modality(modality)
    .expect_card(expected)
    .count(count)
}

/// Type VIII: every event refers to the right number of existing objects of
/// each class linked to its activity.
pub fn check_type_viii(model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    let links = LinkIndex::new(model);
    let mut out = Vec::new();
    let mut replay = log.replay();
    while let Some(step) = replay.advance() {
        let e = step.event;
        for link in links.of_activity(&e.activity) {
            if link.objects.is_any() {
                continue;
            }
            let count = e
                .objects
                .iter()
                .filter(|o| replay.state().class_of(o) == Some(link.class.as_str()))
                .count() as u64;
            if !link.objects.contains(count) {
                out.push(
                    Violation::new(
                        ProblemKind::VIII,
                        e,
                        Subject::ObjectsPerEvent {
                            activity: link.activity.clone(),
                            class: link.class.clone(),
                            event: e.id.clone(),
                        },
                    )
                    .expect_card(&link.objects)
                    .count(count),
                );
            }
        }
    }
    out
}

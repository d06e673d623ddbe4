//! Object-centric event logs.
//!
//! Each event carries the objects it refers to and the change it makes to the
//! object model. The snapshot after an event is the initial model folded with
//! the deltas of every event up to and including it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One tuple `(rel_type, source, target)` of an object model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct Relation {
    pub rel_type: String,
    pub source: String,
    pub target: String,
}

impl Relation {
    pub fn new(rel_type: impl Into<String>, source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            rel_type: rel_type.into(),
            source: source.into(),
            target: target.into(),
        }
    }
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.rel_type, self.source, self.target)
    }
}

impl From<(String, String, String)> for Relation {
    fn from((rel_type, source, target): (String, String, String)) -> Self {
        Self {
            rel_type,
            source,
            target,
        }
    }
}

impl From<Relation> for (String, String, String) {
    fn from(r: Relation) -> Self {
        (r.rel_type, r.source, r.target)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectModel {
    /// Object id to class name.
    pub objects: BTreeMap<String, String>,
    pub relations: BTreeSet<Relation>,
}

impl ObjectModel {
    pub fn class_of(&self, object: &str) -> Option<&str> {
        self.objects.get(object).map(String::as_str)
    }

    pub fn contains(&self, object: &str) -> bool {
        self.objects.contains_key(object)
    }

    pub fn objects_of_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects
            .iter()
            .filter(move |(_, c)| c.as_str() == class)
            .map(|(o, _)| o.as_str())
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Checks that every relation endpoint is an object of the model.
    pub fn check(&self) -> Result<(), DeltaError> {
        for r in &self.relations {
            for end in [&r.source, &r.target] {
                if !self.objects.contains_key(end) {
                    return Err(DeltaError::DanglingEndpoint {
                        relation: r.clone(),
                        object: end.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Applies a delta in place: new objects first, then removals, then
    /// additions. On error the model is left unchanged.
    pub fn apply(&mut self, delta: &ObjectDelta) -> Result<(), DeltaError> {
        let mut fresh = BTreeSet::new();
        for (id, _) in &delta.new_objects {
            if self.objects.contains_key(id) || !fresh.insert(id) {
                return Err(DeltaError::DuplicateObject(id.clone()));
            }
        }
        let exists = |o: &String| self.objects.contains_key(o) || fresh.contains(o);
        let mut removed = BTreeSet::new();
        for r in &delta.removed_relations {
            if !self.relations.contains(r) || !removed.insert(r) {
                return Err(DeltaError::MissingRelation(r.clone()));
            }
        }
        for r in &delta.new_relations {
            for end in [&r.source, &r.target] {
                if !exists(end) {
                    return Err(DeltaError::DanglingEndpoint {
                        relation: r.clone(),
                        object: end.clone(),
                    });
                }
            }
        }
        for (id, class) in &delta.new_objects {
            self.objects.insert(id.clone(), class.clone());
        }
        for r in &delta.removed_relations {
            self.relations.remove(r);
        }
        for r in &delta.new_relations {
            self.relations.insert(r.clone());
        }
        Ok(())
    }
}

/// Objects never disappear through a delta; only relations can be removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObjectDelta {
    pub new_objects: Vec<(String, String)>,
    pub new_relations: Vec<Relation>,
    pub removed_relations: Vec<Relation>,
}

impl ObjectDelta {
    pub fn is_empty(&self) -> bool {
        self.new_objects.is_empty() && self.new_relations.is_empty() && self.removed_relations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeltaError {
    #[error("object `{0}` already exists")]
    DuplicateObject(String),
    #[error("relation {relation} refers to missing object `{object}`")]
    DanglingEndpoint { relation: Relation, object: String },
    #[error("cannot remove absent relation {0}")]
    MissingRelation(Relation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub id: String,
    pub seq: u64,
    pub activity: String,
    pub attrs: BTreeMap<String, String>,
    pub objects: BTreeSet<String>,
    pub delta: ObjectDelta,
    /// When present this is the object model after the event, overriding
    /// the delta fold.
    pub assert_snapshot: Option<ObjectModel>,
}

impl Event {
    pub fn new(id: impl Into<String>, seq: u64, activity: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            seq,
            activity: activity.into(),
            attrs: BTreeMap::new(),
            objects: BTreeSet::new(),
            delta: ObjectDelta::default(),
            assert_snapshot: None,
        }
    }

    pub fn with_objects<I, S>(mut self, objects: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.objects.extend(objects.into_iter().map(Into::into));
        self
    }

    pub fn creating(mut self, id: impl Into<String>, class: impl Into<String>) -> Self {
        self.delta.new_objects.push((id.into(), class.into()));
        self
    }

    pub fn relating(mut self, relation: Relation) -> Self {
        self.delta.new_relations.push(relation);
        self
    }

    pub fn unrelating(mut self, relation: Relation) -> Self {
        self.delta.removed_relations.push(relation);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("events {first} and {second} share sequence number {seq}")]
    DuplicateSeq { seq: u64, first: String, second: String },
    #[error("duplicate event id `{0}`")]
    DuplicateEventId(String),
    #[error("event `{0}` has sequence number 0; sequence numbers start at 1")]
    ZeroSeq(String),
    #[error("event `{event}` (position {position}): {source}")]
    Delta {
        event: String,
        position: usize,
        source: DeltaError,
    },
    #[error("asserted snapshot of event `{event}`: {source}")]
    Snapshot { event: String, source: DeltaError },
    #[error("initial object model: {0}")]
    Init(DeltaError),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
}

/// Non-fatal findings made while building a log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogWarning {
    /// The event refers to an object missing from the snapshot after it.
    DanglingReference { event: String, object: String },
    /// The asserted snapshot differs from the delta fold.
    SnapshotMismatch { event: String },
}

impl std::fmt::Display for LogWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LogWarning::DanglingReference { event, object } => {
                write!(f, "event `{event}` refers to object `{object}`, which does not exist after it")
            }
            LogWarning::SnapshotMismatch { event } => {
                write!(f, "asserted snapshot of event `{event}` differs from the replayed object model")
            }
        }
    }
}

/// A totally ordered, replayable object-centric event log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    init: ObjectModel,
    events: Vec<Event>,
    positions: HashMap<String, usize>,
}

impl EventLog {
    /// Sorts `events` by sequence number and checks that every delta applies.
    pub fn new(init: ObjectModel, events: Vec<Event>) -> Result<Self, LogError> {
        Self::with_warnings(init, events).map(|(log, _)| log)
    }

    pub fn with_warnings(
        init: ObjectModel,
        mut events: Vec<Event>,
    ) -> Result<(Self, Vec<LogWarning>), LogError> {
        init.check().map_err(LogError::Init)?;
        let mut positions = HashMap::with_capacity(events.len());
        for e in &events {
            if e.seq == 0 {
                return Err(LogError::ZeroSeq(e.id.clone()));
            }
            if positions.insert(e.id.clone(), 0).is_some() {
                return Err(LogError::DuplicateEventId(e.id.clone()));
            }
        }
        events.sort_by_key(|e| e.seq);
        for w in events.windows(2) {
            if w[0].seq == w[1].seq {
                return Err(LogError::DuplicateSeq {
                    seq: w[0].seq,
                    first: w[0].id.clone(),
                    second: w[1].id.clone(),
                });
            }
        }
        for (i, e) in events.iter().enumerate() {
            positions.insert(e.id.clone(), i);
        }

        let mut warnings = Vec::new();
        let mut state = init.clone();
        for (position, e) in events.iter().enumerate() {
            state.apply(&e.delta).map_err(|source| LogError::Delta {
                event: e.id.clone(),
                position,
                source,
            })?;
            if let Some(snapshot) = &e.assert_snapshot {
                snapshot.check().map_err(|source| LogError::Snapshot {
                    event: e.id.clone(),
                    source,
                })?;
                if snapshot != &state {
                    warnings.push(LogWarning::SnapshotMismatch { event: e.id.clone() });
                }
                state = snapshot.clone();
            }
            for o in &e.objects {
                if !state.contains(o) {
                    warnings.push(LogWarning::DanglingReference {
                        event: e.id.clone(),
                        object: o.clone(),
                    });
                }
            }
        }
        Ok((
            Self {
                init,
                events,
                positions,
            },
            warnings,
        ))
    }

    pub fn init(&self) -> &ObjectModel {
        &self.init
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn position(&self, event: &str) -> Option<usize> {
        self.positions.get(event).copied()
    }

    pub fn event(&self, id: &str) -> Option<&Event> {
        self.position(id).map(|p| &self.events[p])
    }

    fn require(&self, event: &str) -> Result<usize, LogError> {
        self.position(event)
            .ok_or_else(|| LogError::UnknownEvent(event.to_string()))
    }

    pub fn replay(&self) -> Replay<'_> {
        Replay {
            log: self,
            state: self.init.clone(),
            next: 0,
        }
    }

    /// The object model directly after `event`.
    pub fn snapshot_after(&self, event: &str) -> Result<ObjectModel, LogError> {
        let target = self.require(event)?;
        let mut replay = self.replay();
        while replay.advance().is_some_and(|step| step.position < target) {}
        Ok(replay.state)
    }

    /// The object model after the last event (the initial model if empty).
    pub fn final_snapshot(&self) -> ObjectModel {
        let mut replay = self.replay();
        while replay.advance().is_some() {}
        replay.state
    }

    /// Ids of the events of `activity`, in log order.
    pub fn events_of_activity(&self, activity: &str) -> Vec<&str> {
        self.events
            .iter()
            .filter(|e| e.activity == activity)
            .map(|e| e.id.as_str())
            .collect()
    }

    fn select<'a, I>(&'a self, event: &str, within: I, keep: impl Fn(usize, usize) -> bool) -> Result<Vec<&'a str>, LogError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let pivot = self.require(event)?;
        let mut picked: Vec<usize> = within
            .into_iter()
            .filter_map(|id| self.position(id))
            .filter(|&p| keep(p, pivot))
            .collect();
        picked.sort_unstable();
        picked.dedup();
        Ok(picked.into_iter().map(|p| self.events[p].id.as_str()).collect())
    }

    /// Events of `within` strictly before `event`, in log order.
    pub fn before<'a, I>(&'a self, event: &str, within: I) -> Result<Vec<&'a str>, LogError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.select(event, within, |p, pivot| p < pivot)
    }

    /// Events of `within` strictly after `event`, in log order.
    pub fn after<'a, I>(&'a self, event: &str, within: I) -> Result<Vec<&'a str>, LogError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.select(event, within, |p, pivot| p > pivot)
    }

    pub fn before_incl<'a, I>(&'a self, event: &str, within: I) -> Result<Vec<&'a str>, LogError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.select(event, within, |p, pivot| p <= pivot)
    }

    pub fn after_incl<'a, I>(&'a self, event: &str, within: I) -> Result<Vec<&'a str>, LogError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        self.select(event, within, |p, pivot| p >= pivot)
    }
}

/// What changed in the object model at one event.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepChanges {
    pub added_objects: Vec<String>,
    /// Only reachable through asserted snapshots.
    pub removed_objects: Vec<String>,
    /// `(object, old class, new class)`; only reachable through asserted
    /// snapshots.
    pub reclassified: Vec<(String, String, String)>,
    pub added_relations: Vec<Relation>,
    pub removed_relations: Vec<Relation>,
}

pub struct Step<'a> {
    pub position: usize,
    pub event: &'a Event,
    pub changes: StepChanges,
}

/// Incremental replay over a log, one event at a time.
pub struct Replay<'a> {
    log: &'a EventLog,
    state: ObjectModel,
    next: usize,
}

impl<'a> Replay<'a> {
    /// The object model after the most recently replayed event.
    pub fn state(&self) -> &ObjectModel {
        &self.state
    }

    pub fn advance(&mut self) -> Option<Step<'a>> {
        let position = self.next;
        let event = self.log.events.get(position)?;
        self.next += 1;
        let changes = match &event.assert_snapshot {
            None => {
                let mut changes = StepChanges {
                    added_objects: event.delta.new_objects.iter().map(|(o, _)| o.clone()).collect(),
                    ..StepChanges::default()
                };
                for r in &event.delta.removed_relations {
                    changes.removed_relations.push(r.clone());
                }
                let mut after_removal: BTreeSet<&Relation> = BTreeSet::new();
                for r in &event.delta.new_relations {
                    let present = self.state.relations.contains(r)
                        && !event.delta.removed_relations.contains(r);
                    if !present && after_removal.insert(r) {
                        changes.added_relations.push(r.clone());
                    }
                }
                self.state
                    .apply(&event.delta)
                    .expect("deltas were validated when the log was built");
                changes
            }
            Some(snapshot) => {
                let changes = diff(&self.state, snapshot);
                self.state = snapshot.clone();
                changes
            }
        };
        Some(Step {
            position,
            event,
            changes,
        })
    }
}

fn diff(old: &ObjectModel, new: &ObjectModel) -> StepChanges {
    let mut changes = StepChanges::default();
    for (o, class) in &new.objects {
        match old.objects.get(o) {
            None => changes.added_objects.push(o.clone()),
            Some(previous) if previous != class => {
                changes
                    .reclassified
                    .push((o.clone(), previous.clone(), class.clone()));
            }
            Some(_) => {}
        }
    }
    for o in old.objects.keys() {
        if !new.objects.contains_key(o) {
            changes.removed_objects.push(o.clone());
        }
    }
    changes.added_relations = new.relations.difference(&old.relations).cloned().collect();
    changes.removed_relations = old.relations.difference(&new.relations).cloned().collect();
    changes
}

//! Conformance checking of an event log against an OCBC model.
//!
//! Each of the nine problem kinds has its own checker. The checkers are
//! independent: [`check_all`] is exactly the sorted concatenation of their
//! outputs.
//!
//! Logs are finite, so every "eventually" condition is evaluated at the last
//! event. A condition of the form "from some point on, P holds" is true on a
//! finite log iff P holds at its end.

mod behavior;
mod events;
mod structure;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cardinality::Cardinality;
use crate::constraint_type::ConstraintType;
use crate::log::{Event, EventLog};
use crate::model::{Modality, OcbcModel, Side};
use crate::report::{aggregate, ConformanceReport};

pub use behavior::{check_type_ix, resolve_targets, type_ix_verdicts, ResolveError};
pub use events::{check_type_iv, check_type_v, check_type_vi, check_type_vii, check_type_viii};
pub use structure::{check_type_i, check_type_ii, check_type_iii};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 9] = [
        ProblemKind::I,
        ProblemKind::II,
        ProblemKind::III,
        ProblemKind::IV,
        ProblemKind::V,
        ProblemKind::VI,
        ProblemKind::VII,
        ProblemKind::VIII,
        ProblemKind::IX,
    ];

    pub fn numeral(self) -> &'static str {
        match self {
            ProblemKind::I => "I",
            ProblemKind::II => "II",
            ProblemKind::III => "III",
            ProblemKind::IV => "IV",
            ProblemKind::V => "V",
            ProblemKind::VI => "VI",
            ProblemKind::VII => "VII",
            ProblemKind::VIII => "VIII",
            ProblemKind::IX => "IX",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ProblemKind::I => "validity of object models",
            ProblemKind::II => "fulfilment",
            ProblemKind::III => "monotonicity",
            ProblemKind::IV => "activity existence",
            ProblemKind::V => "object existence",
            ProblemKind::VI => "proper classes",
            ProblemKind::VII => "right number of events per object",
            ProblemKind::VIII => "right number of objects per event",
            ProblemKind::IX => "behavioral constraints respected",
        }
    }

    /// Runs the checker for this kind alone.
    pub fn check(self, model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
        match self {
            ProblemKind::I => check_type_i(model, log),
            ProblemKind::II => check_type_ii(model, log),
            ProblemKind::III => check_type_iii(model, log),
            ProblemKind::IV => check_type_iv(model, log),
            ProblemKind::V => check_type_v(model, log),
            ProblemKind::VI => check_type_vi(model, log),
            ProblemKind::VII => check_type_vii(model, log),
            ProblemKind::VIII => check_type_viii(model, log),
            ProblemKind::IX => check_type_ix(model, log),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.numeral())
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.numeral() == upper)
            .ok_or_else(|| format!("unknown problem kind `{s}` (expected I..IX)"))
    }
}

/// The event at which a problem is detected.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventRef {
    pub seq: u64,
    pub id: String,
}

impl EventRef {
    pub fn of(event: &Event) -> Self {
        Self {
            seq: event.seq,
            id: event.id.clone(),
        }
    }
}

/// What a violation is about. Each kind uses its own variants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Subject {
    /// I: a relation whose endpoints have the wrong classes, or whose type is
    /// not declared.
    RelationTyping {
        rel_type: String,
        source: String,
        target: String,
    },
    /// I and II: the number of objects `object` is related to through
    /// `rel_type`, counted at `side`.
    ObjectCardinality {
        rel_type: String,
        side: Side,
        object: String,
    },
    /// III
    Disappeared { object: String, class: String },
    /// III
    ClassChanged {
        object: String,
        from: String,
        to: String,
    },
    /// IV
    UnknownActivity { event: String, activity: String },
    /// V
    MissingObject { event: String, object: String },
    /// VI
    ImproperClass {
        event: String,
        object: String,
        class: String,
    },
    /// VII
    EventsPerObject {
        activity: String,
        class: String,
        object: String,
    },
    /// VIII
    ObjectsPerEvent {
        activity: String,
        class: String,
        event: String,
    },
    /// IX
    ConstraintAtEvent { constraint: String, event: String },
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::RelationTyping {
                rel_type,
                source,
                target,
            } => write!(f, "relation ({rel_type}, {source}, {target})"),
            Subject::ObjectCardinality {
                rel_type,
                side,
                object,
            } => write!(f, "object {object} on the {side} side of {rel_type}"),
            Subject::Disappeared { object, class } => {
                write!(f, "object {object} ({class}) disappeared")
            }
            Subject::ClassChanged { object, from, to } => {
                write!(f, "object {object} changed class from {from} to {to}")
            }
            Subject::UnknownActivity { event, activity } => {
                write!(f, "event {event} has undeclared activity `{activity}`")
            }
            Subject::MissingObject { event, object } => {
                write!(f, "event {event} refers to missing object {object}")
            }
            Subject::ImproperClass {
                event,
                object,
                class,
            } => write!(f, "event {event} refers to {object} of unlinked class {class}"),
            Subject::EventsPerObject {
                activity,
                class,
                object,
            } => write!(f, "{activity} events of {class} object {object}"),
            Subject::ObjectsPerEvent {
                activity,
                class,
                event,
            } => write!(f, "{class} objects of {activity} event {event}"),
            Subject::ConstraintAtEvent { constraint, event } => {
                write!(f, "constraint {constraint} at reference event {event}")
            }
        }
    }
}

/// What was found.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Observed {
    Count { count: u64 },
    BeforeAfter { before: u64, after: u64 },
    Classes { source_class: String, target_class: String },
}

impl fmt::Display for Observed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observed::Count { count } => write!(f, "{count}"),
            Observed::BeforeAfter { before, after } => {
                write!(f, "(before, after) = ({before}, {after})")
            }
            Observed::Classes {
                source_class,
                target_class,
            } => write!(f, "classes ({source_class}, {target_class})"),
        }
    }
}

/// The annotation that was violated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Expected {
    Cardinality { cardinality: Cardinality },
    ConstraintType { constraint_type: ConstraintType },
    Classes { source_class: String, target_class: String },
}

impl fmt::Display for Expected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expected::Cardinality { cardinality } => write!(f, "{cardinality}"),
            Expected::ConstraintType { constraint_type } => write!(f, "{constraint_type}"),
            Expected::Classes {
                source_class,
                target_class,
            } => write!(f, "classes ({source_class}, {target_class})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    /// A problem that later events could still repair; only used when
    /// checking a log prefix.
    Warning,
}

/// One detected conformance problem.
///
/// The derived order sorts by kind, then by the position of the detecting
/// event, then by subject.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Violation {
    pub kind: ProblemKind,
    pub at_event: EventRef,
    pub subject: Subject,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Observed>,
    pub severity: Severity,
}

impl Violation {
    pub(crate) fn new(kind: ProblemKind, at: &Event, subject: Subject) -> Self {
        Self {
            kind,
            at_event: EventRef::of(at),
            subject,
            modality: None,
            expected: None,
            observed: None,
            severity: Severity::Error,
        }
    }

    pub(crate) fn modality(mut self, modality: Modality) -> Self {
        self.modality = Some(modality);
        self
    }

    pub(crate) fn expect_card(mut self, cardinality: &Cardinality) -> Self {
        self.expected = Some(Expected::Cardinality {
            cardinality: cardinality.clone(),
        });
        self
    }

    pub(crate) fn count(mut self, count: u64) -> Self {
        self.observed = Some(Observed::Count { count });
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.subject)?;
        if let Some(expected) = &self.expected {
            let marker = match self.modality {
                Some(Modality::Always) => "□ ",
                Some(Modality::Eventually) => "◇ ",
                None => "",
            };
            write!(f, ": expected {marker}{expected}")?;
        }
        if let Some(observed) = &self.observed {
            write!(f, ", observed {observed}")?;
        }
        write!(f, " at {} (seq {})", self.at_event.id, self.at_event.seq)?;
        if self.severity == Severity::Warning {
            f.write_str(" [warning]")?;
        }
        Ok(())
    }
}

/// Remembers which subjects currently fail so that a breach is reported once
/// per episode rather than at every position it persists.
pub(crate) struct Episodes<K> {
    failing: HashSet<K>,
}

impl<K> Default for Episodes<K> {
    fn default() -> Self {
        Self {
            failing: HashSet::new(),
        }
    }
}

impl<K: Hash + Eq + Clone> Episodes<K> {
    /// Records whether `key` fails at the current position and returns true
    /// iff this starts a new episode.
    pub(crate) fn observe(&mut self, key: &K, failing: bool) -> bool {
        if failing {
            !self.failing.contains(key) && self.failing.insert(key.clone())
        } else {
            self.failing.remove(key);
            false
        }
    }

    pub(crate) fn current(&self) -> impl Iterator<Item = &K> {
        self.failing.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOptions {
    /// Problem kinds to check; the rest are skipped entirely.
    pub kinds: BTreeSet<ProblemKind>,
    /// Treat the log as the prefix of a running process: problems that later
    /// events could still repair become warnings.
    pub prefix: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            kinds: ProblemKind::ALL.into_iter().collect(),
            prefix: false,
        }
    }
}

/// All violations of the selected kinds, sorted.
pub fn violations(model: &OcbcModel, log: &EventLog, options: &CheckOptions) -> Vec<Violation> {
    let mut all: Vec<Violation> = options
        .kinds
        .iter()
        .flat_map(|kind| kind.check(model, log))
        .collect();
    if options.prefix {
        for v in &mut all {
            if repairable_later(v) {
                v.severity = Severity::Warning;
            }
        }
    }
    all.sort();
    all
}

fn repairable_later(v: &Violation) -> bool {
    match v.kind {
        ProblemKind::II => true,
        ProblemKind::VII => v.modality == Some(Modality::Eventually),
        ProblemKind::IX => match (&v.expected, &v.observed) {
            (
                Some(Expected::ConstraintType { constraint_type }),
                Some(Observed::BeforeAfter { before, after }),
            ) => constraint_type.satisfiable_later(*before, *after),
            _ => false,
        },
        _ => false,
    }
}

/// Checks all nine problem kinds.
pub fn check_all(model: &OcbcModel, log: &EventLog) -> ConformanceReport {
    check_with(model, log, &CheckOptions::default())
}

pub fn check_with(model: &OcbcModel, log: &EventLog, options: &CheckOptions) -> ConformanceReport {
    aggregate(violations(model, log, options))
}


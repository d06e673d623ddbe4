//! Type IX: behavioral constraints evaluated over events correlated through
//! the object model.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::bc::BcVerdict;
use crate::log::{Event, EventLog, ObjectModel};
use crate::model::{Constraint, OcbcModel, Scope};

use super::{Expected, Observed, ProblemKind, Subject, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("unknown constraint `{0}`")]
    UnknownConstraint(String),
    #[error("constraint `{0}` has no usable scope")]
    NoScope(String),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("event `{event}` is a `{actual}` event, not a `{expected}` event")]
    ActivityMismatch {
        event: String,
        expected: String,
        actual: String,
    },
}

/// The target events of constraint `constraint` for reference event `e_ref`,
/// correlated through the object model `om`.
///
/// With a class scope, target events must share a reference to an object of
/// that class. With a relationship scope, the target event must refer to an
/// object related to one the reference event refers to, in either direction.
pub fn resolve_targets(
    model: &OcbcModel,
    log: &EventLog,
    constraint: &str,
    e_ref: &str,
    om: &ObjectModel,
) -> Result<BTreeSet<String>, ResolveError> {
    let c = model
        .behavior
        .constraints
        .get(constraint)
        .ok_or_else(|| ResolveError::UnknownConstraint(constraint.to_string()))?;
    let scope = model
        .scope_of(constraint)
        .ok_or_else(|| ResolveError::NoScope(constraint.to_string()))?;
    let reference = log
        .event(e_ref)
        .ok_or_else(|| ResolveError::UnknownEvent(e_ref.to_string()))?;
    if reference.activity != c.reference {
        return Err(ResolveError::ActivityMismatch {
            event: e_ref.to_string(),
            expected: c.reference.clone(),
            actual: reference.activity.clone(),
        });
    }
    let correlated = |target: &Event| -> bool {
        match scope {
            Scope::Class(class) => reference
                .objects
                .iter()
                .any(|o| om.class_of(o) == Some(class) && target.objects.contains(o)),
            Scope::Relationship(rel) => om.relations.iter().any(|r| {
                r.rel_type == rel.id
                    && ((reference.objects.contains(&r.source) && target.objects.contains(&r.target))
                        || (reference.objects.contains(&r.target) && target.objects.contains(&r.source)))
            }),
        }
    };
    Ok(log
        .events()
        .iter()
        .filter(|e| e.activity == c.target && correlated(e))
        .map(|e| e.id.clone())
        .collect())
}

/// Target-event positions reachable from each object, for one constraint.
struct Correlation<'l> {
    /// Object to the target events referring to it.
    targets_of: HashMap<&'l str, Vec<usize>>,
    /// For relationship scopes: object to its neighbours, both directions.
    neighbours: Option<HashMap<&'l str, Vec<&'l str>>>,
    /// For class scopes: the class a shared object must have.
    class: Option<&'l str>,
}

impl<'l> Correlation<'l> {
    fn new(log: &'l EventLog, om: &'l ObjectModel, c: &Constraint, scope: Scope<'l>) -> Self {
        let mut targets_of: HashMap<&str, Vec<usize>> = HashMap::new();
        for (pos, e) in log.events().iter().enumerate() {
            if e.activity == c.target {
                for o in &e.objects {
                    targets_of.entry(o).or_default().push(pos);
                }
            }
        }
        match scope {
            Scope::Class(class) => Self {
                targets_of,
                neighbours: None,
                class: Some(class),
            },
            Scope::Relationship(rel) => {
                let mut neighbours: HashMap<&str, Vec<&str>> = HashMap::new();
                for r in om.relations.iter().filter(|r| r.rel_type == rel.id) {
                    neighbours.entry(&r.source).or_default().push(&r.target);
                    neighbours.entry(&r.target).or_default().push(&r.source);
                }
                Self {
                    targets_of,
                    neighbours: Some(neighbours),
                    class: None,
                }
            }
        }
    }

    /// Calls `visit` for every target position correlated with `reference`,
    /// possibly more than once per position.
    fn for_each_target(&self, om: &ObjectModel, reference: &Event, mut visit: impl FnMut(usize)) {
        let mut hit = |o: &str| {
            if let Some(ps) = self.targets_of.get(o) {
                ps.iter().for_each(|&p| visit(p));
            }
        };
        match (&self.neighbours, self.class) {
            (Some(neighbours), _) => {
                for o1 in &reference.objects {
                    for o2 in neighbours.get(o1.as_str()).into_iter().flatten() {
                        hit(o2);
                    }
                }
            }
            (None, Some(class)) => {
                for o in &reference.objects {
                    if om.class_of(o) == Some(class) {
                        hit(o);
                    }
                }
            }
            (None, None) => {}
        }
    }
}

/// Before/after counts of every constraint at every reference event,
/// correlated through the final snapshot.
///
/// Verdicts are grouped by constraint id and ordered by event within a
/// constraint. Constraints without a usable scope yield no verdicts.
pub fn type_ix_verdicts(model: &OcbcModel, log: &EventLog) -> Vec<BcVerdict> {
    let om = log.final_snapshot();
    let events = log.events();
    let mut stamp = vec![usize::MAX; events.len()];
    let mut out = Vec::new();
    for c in model.behavior.constraints.values() {
        let Some(scope) = model.scope_of(&c.id) else {
            continue;
        };
        let correlation = Correlation::new(log, &om, c, scope);
        for (ref_pos, reference) in events.iter().enumerate() {
            if reference.activity != c.reference {
                continue;
            }
            let (mut before, mut after) = (0u64, 0u64);
            correlation.for_each_target(&om, reference, |p| {
                if stamp[p] != ref_pos {
                    stamp[p] = ref_pos;
                    if p < ref_pos {
                        before += 1;
                    } else if p > ref_pos {
                        after += 1;
                    }
                }
            });
            out.push(BcVerdict {
                constraint: c.id.clone(),
                ref_event: reference.id.clone(),
                before,
                after,
                satisfied: c.ctype.accepts(before, after),
            });
        }
        stamp.fill(usize::MAX);
    }
    out
}

/// Type IX: one violation per constraint and reference event at which the
/// before/after counts of correlated target events fall outside the
/// constraint type.
pub fn check_type_ix(model: &OcbcModel, log: &EventLog) -> Vec<Violation> {
    type_ix_verdicts(model, log)
        .into_iter()
        .filter(|v| !v.satisfied)
        .map(|v| {
            let at = log.event(&v.ref_event).expect("verdict refers to a logged event");
            let c = &model.behavior.constraints[&v.constraint];
            let mut violation = Violation::new(
                ProblemKind::IX,
                at,
                Subject::ConstraintAtEvent {
                    constraint: v.constraint,
                    event: v.ref_event,
                },
            );
            violation.expected = Some(Expected::ConstraintType {
                constraint_type: c.ctype.clone(),
            });
            violation.observed = Some(Observed::BeforeAfter {
                before: v.before,
                after: v.after,
            });
            violation
        })
        .collect()
}

//! Plain behavioral constraint evaluation over a totally ordered event
//! sequence, without any object correlation.

use std::collections::HashMap;

use crate::constraint_type::ConstraintType;
use crate::log::Event;
use crate::model::{BcModel, Constraint};

/// Anything with an identity and an activity.
pub trait BcEvent {
    fn id(&self) -> &str;
    fn activity(&self) -> &str;
}

impl BcEvent for Event {
    fn id(&self) -> &str {
        &self.id
    }
    fn activity(&self) -> &str {
        &self.activity
    }
}

impl<A: AsRef<str>, B: AsRef<str>> BcEvent for (A, B) {
    fn id(&self) -> &str {
        self.0.as_ref()
    }
    fn activity(&self) -> &str {
        self.1.as_ref()
    }
}

/// The outcome of one constraint at one reference event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BcVerdict {
    pub constraint: String,
    pub ref_event: String,
    pub before: u64,
    pub after: u64,
    pub satisfied: bool,
}

/// Evaluates every constraint of `bcm` at every one of its reference events.
///
/// Verdicts come out grouped by constraint id and, within a constraint, in
/// event order. Counts are strict: the reference event itself never counts.
pub fn evaluate_bc<E: BcEvent>(bcm: &BcModel, events: &[E]) -> Vec<BcVerdict> {
    let mut totals: HashMap<&str, u64> = HashMap::new();
    for e in events {
        *totals.entry(e.activity()).or_default() += 1;
    }
    let mut seen: HashMap<&str, u64> = HashMap::new();
    let mut per_constraint: Vec<Vec<BcVerdict>> = vec![Vec::new(); bcm.constraints.len()];
    for e in events {
        let activity = e.activity();
        for (slot, c) in bcm.constraints.values().enumerate() {
            if c.reference != activity {
                continue;
            }
            let target = c.target.as_str();
            let before = seen.get(target).copied().unwrap_or(0);
            let total = totals.get(target).copied().unwrap_or(0);
            let after = total - before - u64::from(activity == target);
            per_constraint[slot].push(BcVerdict {
                constraint: c.id.clone(),
                ref_event: e.id().to_string(),
                before,
                after,
                satisfied: c.ctype.accepts(before, after),
            });
        }
        *seen.entry(activity).or_default() += 1;
    }
    per_constraint.into_iter().flatten().collect()
}

/// Whether every verdict of [`evaluate_bc`] holds.
pub fn satisfies<E: BcEvent>(bcm: &BcModel, events: &[E]) -> bool {
    evaluate_bc(bcm, events).iter().all(|v| v.satisfied)
}

/// A two-dot arrow: `ctype` read from `reference` towards `target`, and
/// `pair` read from `target` back towards `reference`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairConstraint {
    pub id: String,
    pub reference: String,
    pub target: String,
    pub ctype: ConstraintType,
    pub pair: ConstraintType,
}

/// Splits a pair arrow into the two directed constraints it stands for,
/// named `<id>.1` and `<id>.2`.
pub fn expand_shorthand(pair: &PairConstraint) -> (Constraint, Constraint) {
    (
        Constraint {
            id: format!("{}.1", pair.id),
            reference: pair.reference.clone(),
            target: pair.target.clone(),
            ctype: pair.ctype.clone(),
        },
        Constraint {
            id: format!("{}.2", pair.id),
            reference: pair.target.clone(),
            target: pair.reference.clone(),
            ctype: pair.pair.clone(),
        },
    )
}

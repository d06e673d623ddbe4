//! Constraint types: predicates over the number of correlated target events
//! before and after a reference event.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cardinality::Cardinality;

/// A conjunction of cardinality atoms over `before`, `after` and
/// `before + after`. Absent atoms impose nothing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawConstraintType")]
pub struct ConstraintType {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    before: Option<Cardinality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    after: Option<Cardinality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sum: Option<Cardinality>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraintType {
    #[serde(default)]
    before: Option<Cardinality>,
    #[serde(default)]
    after: Option<Cardinality>,
    #[serde(default)]
    sum: Option<Cardinality>,
}

impl TryFrom<RawConstraintType> for ConstraintType {
    type Error = ConstraintTypeError;

    fn try_from(raw: RawConstraintType) -> Result<Self, Self::Error> {
        ConstraintType::new(raw.before, raw.after, raw.sum)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintTypeError {
    #[error("constraint type needs at least one of before, after or sum")]
    NoAtoms,
    #[error("unknown constraint template `{0}`")]
    UnknownTemplate(String),
}

impl ConstraintType {
    pub fn new(
        before: Option<Cardinality>,
        after: Option<Cardinality>,
        sum: Option<Cardinality>,
    ) -> Result<Self, ConstraintTypeError> {
        if before.is_none() && after.is_none() && sum.is_none() {
            return Err(ConstraintTypeError::NoAtoms);
        }
        Ok(Self { before, after, sum })
    }

    pub fn before(&self) -> Option<&Cardinality> {
        self.before.as_ref()
    }

    pub fn after(&self) -> Option<&Cardinality> {
        self.after.as_ref()
    }

    pub fn sum(&self) -> Option<&Cardinality> {
        self.sum.as_ref()
    }

    pub fn accepts(&self, before: u64, after: u64) -> bool {
        self.before.as_ref().is_none_or(|c| c.contains(before))
            && self.after.as_ref().is_none_or(|c| c.contains(after))
            && self
                .sum
                .as_ref()
                .is_none_or(|c| c.contains(before.saturating_add(after)))
    }

    /// Whether some count `after' >= after` would be accepted together with
    /// `before`, i.e. whether more target events later could still repair a
    /// failing verdict.
    pub fn satisfiable_later(&self, before: u64, after: u64) -> bool {
        let horizon = [&self.after, &self.sum]
            .into_iter()
            .flatten()
            .map(|c| u64::from(c.largest_bound()))
            .max()
            .unwrap_or(0);
        // Beyond `horizon + 1` membership of `after` and `before + after` no
        // longer changes.
        let last = after.max(horizon + 1);
        (after..=last).any(|a| self.accepts(before, a))
    }

    /// The named template this type is equal to, if any.
    pub fn template(&self) -> Option<Template> {
        Template::ALL
            .into_iter()
            .find(|t| &t.constraint_type() == self)
    }
}

impl fmt::Display for ConstraintType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = self.template() {
            return write!(f, "{t}");
        }
        let atoms = [
            ("before", &self.before),
            ("after", &self.after),
            ("before+after", &self.sum),
        ];
        let mut first = true;
        for (name, card) in atoms {
            if let Some(card) = card {
                if !first {
                    f.write_str(" & ")?;
                }
                write!(f, "{name} in {card}")?;
                first = false;
            }
        }
        Ok(())
    }
}

/// The eight Declare-inspired templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Template {
    Response,
    UnaryResponse,
    NonResponse,
    Precedence,
    UnaryPrecedence,
    NonPrecedence,
    CoExistence,
    NonCoExistence,
}

impl Template {
    pub const ALL: [Template; 8] = [
        Template::Response,
        Template::UnaryResponse,
        Template::NonResponse,
        Template::Precedence,
        Template::UnaryPrecedence,
        Template::NonPrecedence,
        Template::CoExistence,
        Template::NonCoExistence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::Response => "response",
            Template::UnaryResponse => "unary-response",
            Template::NonResponse => "non-response",
            Template::Precedence => "precedence",
            Template::UnaryPrecedence => "unary-precedence",
            Template::NonPrecedence => "non-precedence",
            Template::CoExistence => "co-existence",
            Template::NonCoExistence => "non-co-existence",
        }
    }

    pub fn constraint_type(self) -> ConstraintType {
        let (before, after, sum) = match self {
            Template::Response => (None, Some(Cardinality::at_least(1)), None),
            Template::UnaryResponse => (None, Some(Cardinality::exactly(1)), None),
            Template::NonResponse => (None, Some(Cardinality::exactly(0)), None),
            Template::Precedence => (Some(Cardinality::at_least(1)), None, None),
            Template::UnaryPrecedence => (Some(Cardinality::exactly(1)), None, None),
            Template::NonPrecedence => (Some(Cardinality::exactly(0)), None, None),
            Template::CoExistence => (None, None, Some(Cardinality::at_least(1))),
            Template::NonCoExistence => (None, None, Some(Cardinality::exactly(0))),
        };
        ConstraintType { before, after, sum }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = ConstraintTypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| ConstraintTypeError::UnknownTemplate(s.to_string()))
    }
}

/// Looks up one of the eight named templates.
pub fn builtin_constraint_type(name: &str) -> Result<ConstraintType, ConstraintTypeError> {
    name.parse::<Template>().map(Template::constraint_type)
}

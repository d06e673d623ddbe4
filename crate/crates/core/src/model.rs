//! Behavioral constraint models, class models and their integration into
//! object-centric behavioral constraint (OCBC) models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cardinality::Cardinality;
use crate::constraint_type::ConstraintType;

/// A behavioral constraint: for every event of `reference`, count the
/// correlated `target` events before and after it and test them against
/// `ctype`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub id: String,
    pub reference: String,
    pub target: String,
    pub ctype: ConstraintType,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BcModel {
    pub activities: BTreeSet<String>,
    pub constraints: BTreeMap<String, Constraint>,
}

impl BcModel {
    pub fn add_activity(&mut self, name: impl Into<String>) -> &mut Self {
        self.activities.insert(name.into());
        self
    }

    pub fn add_constraint(&mut self, constraint: Constraint) -> &mut Self {
        self.constraints.insert(constraint.id.clone(), constraint);
        self
    }

    pub fn validate(&self) -> Vec<ModelDefect> {
        let mut defects = Vec::new();
        for id in &self.activities {
            if self.constraints.contains_key(id) {
                defects.push(ModelDefect::NameClash {
                    name: id.clone(),
                    first: Universe::Activity,
                    second: Universe::Constraint,
                });
            }
        }
        for c in self.constraints.values() {
            for activity in [&c.reference, &c.target] {
                if !self.activities.contains(activity) {
                    defects.push(ModelDefect::UnknownActivity {
                        context: format!("constraint {}", c.id),
                        activity: activity.clone(),
                    });
                }
            }
        }
        defects
    }
}

/// Which end of a relationship type a cardinality talks about.
///
/// The source cardinality bounds how many source objects each target object
/// is related to; the target cardinality bounds how many targets each source
/// object has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Source => "source",
            Side::Target => "target",
        })
    }
}

/// Always (□) or eventually (◇).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Always,
    Eventually,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Always => "always",
            Modality::Eventually => "eventually",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationshipType {
    pub id: String,
    pub source: String,
    pub target: String,
    pub source_always: Cardinality,
    pub source_eventually: Cardinality,
    pub target_always: Cardinality,
    pub target_eventually: Cardinality,
}

impl RelationshipType {
    /// A relationship with no cardinality restrictions.
    pub fn new(id: impl Into<String>, source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            target: target.into(),
            source_always: Cardinality::any(),
            source_eventually: Cardinality::any(),
            target_always: Cardinality::any(),
            target_eventually: Cardinality::any(),
        }
    }

    pub fn card(&self, side: Side, modality: Modality) -> &Cardinality {
        match (side, modality) {
            (Side::Source, Modality::Always) => &self.source_always,
            (Side::Source, Modality::Eventually) => &self.source_eventually,
            (Side::Target, Modality::Always) => &self.target_always,
            (Side::Target, Modality::Eventually) => &self.target_eventually,
        }
    }

    /// Class whose objects are counted by the `side` cardinality.
    pub fn class_at(&self, side: Side) -> &str {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }

    /// Class of the objects the `side` cardinality is evaluated for.
    pub fn anchor_class(&self, side: Side) -> &str {
        match side {
            Side::Source => &self.target,
            Side::Target => &self.source,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassModel {
    pub classes: BTreeSet<String>,
    pub relationships: BTreeMap<String, RelationshipType>,
}

impl ClassModel {
    pub fn add_class(&mut self, name: impl Into<String>) -> &mut Self {
        self.classes.insert(name.into());
        self
    }

    pub fn add_relationship(&mut self, rel: RelationshipType) -> &mut Self {
        self.relationships.insert(rel.id.clone(), rel);
        self
    }

    pub fn validate(&self) -> Vec<ModelDefect> {
        let mut defects = Vec::new();
        for rel in self.relationships.values() {
            if self.classes.contains(&rel.id) {
                defects.push(ModelDefect::NameClash {
                    name: rel.id.clone(),
                    first: Universe::Class,
                    second: Universe::Relationship,
                });
            }
            for class in [&rel.source, &rel.target] {
                if !self.classes.contains(class) {
                    defects.push(ModelDefect::UnknownClass {
                        context: format!("relationship {}", rel.id),
                        class: class.clone(),
                    });
                }
            }
            for side in [Side::Source, Side::Target] {
                let always = rel.card(side, Modality::Always);
                let eventually = rel.card(side, Modality::Eventually);
                if !eventually.is_subset_of(always) {
                    defects.push(ModelDefect::EventuallyNotSubset {
                        subject: format!("relationship {} {side}", rel.id),
                        always: always.clone(),
                        eventually: eventually.clone(),
                    });
                }
            }
        }
        defects
    }
}

/// An activity/class link with its three cardinality annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AocLink {
    pub activity: String,
    pub class: String,
    /// Number of `activity` events per object, at every point in time.
    pub events_always: Cardinality,
    /// Number of `activity` events per object, eventually.
    pub events_eventually: Cardinality,
    /// Number of `class` objects per `activity` event.
    pub objects: Cardinality,
}

impl AocLink {
    pub fn new(activity: impl Into<String>, class: impl Into<String>) -> Self {
        Self {
            activity: activity.into(),
            class: class.into(),
            events_always: Cardinality::any(),
            events_eventually: Cardinality::any(),
            objects: Cardinality::any(),
        }
    }

    pub fn events(&self, modality: Modality) -> &Cardinality {
        match modality {
            Modality::Always => &self.events_always,
            Modality::Eventually => &self.events_eventually,
        }
    }
}

/// How a constraint correlates reference and target events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope<'a> {
    /// Through shared objects of a class.
    Class(&'a str),
    /// Through relations of a type, traversed in either direction.
    Relationship(&'a RelationshipType),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OcbcModel {
    pub behavior: BcModel,
    pub class_model: ClassModel,
    pub links: BTreeMap<(String, String), AocLink>,
    /// Constraint id to class name or relationship id.
    pub scope: BTreeMap<String, String>,
}

impl OcbcModel {
    pub fn add_link(&mut self, link: AocLink) -> &mut Self {
        self.links
            .insert((link.activity.clone(), link.class.clone()), link);
        self
    }

    pub fn link(&self, activity: &str, class: &str) -> Option<&AocLink> {
        // BTreeMap<(String, String), _> cannot be queried with borrowed
        // tuples, hence the range scan.
        self.links
            .range((activity.to_string(), class.to_string())..)
            .next()
            .filter(|((a, c), _)| a == activity && c == class)
            .map(|(_, l)| l)
    }

    pub fn has_link(&self, activity: &str, class: &str) -> bool {
        self.link(activity, class).is_some()
    }

    pub fn scope_of(&self, constraint: &str) -> Option<Scope<'_>> {
        let name = self.scope.get(constraint)?;
        if self.class_model.classes.contains(name) {
            Some(Scope::Class(name))
        } else {
            self.class_model
                .relationships
                .get(name)
                .map(Scope::Relationship)
        }
    }

    /// Every well-formedness defect of the model; empty means well-formed.
    pub fn validate(&self) -> Vec<ModelDefect> {
        let mut defects = self.name_clashes();
        defects.extend(
            self.behavior
                .validate()
                .into_iter()
                .filter(|d| !matches!(d, ModelDefect::NameClash { .. })),
        );
        defects.extend(
            self.class_model
                .validate()
                .into_iter()
                .filter(|d| !matches!(d, ModelDefect::NameClash { .. })),
        );

        for link in self.links.values() {
            let context = format!("link ({}, {})", link.activity, link.class);
            if !self.behavior.activities.contains(&link.activity) {
                defects.push(ModelDefect::UnknownActivity {
                    context: context.clone(),
                    activity: link.activity.clone(),
                });
            }
            if !self.class_model.classes.contains(&link.class) {
                defects.push(ModelDefect::UnknownClass {
                    context: context.clone(),
                    class: link.class.clone(),
                });
            }
            if !link.events_eventually.is_subset_of(&link.events_always) {
                defects.push(ModelDefect::EventuallyNotSubset {
                    subject: context,
                    always: link.events_always.clone(),
                    eventually: link.events_eventually.clone(),
                });
            }
        }

        for c in self.behavior.constraints.values() {
            let Some(name) = self.scope.get(&c.id) else {
                defects.push(ModelDefect::MissingScope {
                    constraint: c.id.clone(),
                });
                continue;
            };
            match self.scope_of(&c.id) {
                None => defects.push(ModelDefect::UnknownScope {
                    constraint: c.id.clone(),
                    name: name.clone(),
                }),
                Some(Scope::Class(class)) => {
                    for activity in [&c.reference, &c.target] {
                        if !self.has_link(activity, class) {
                            defects.push(ModelDefect::ClassScopeUnlinked {
                                constraint: c.id.clone(),
                                activity: activity.clone(),
                                class: class.to_string(),
                            });
                        }
                    }
                }
                Some(Scope::Relationship(rel)) => {
                    let forward = self.has_link(&c.reference, &rel.source)
                        && self.has_link(&c.target, &rel.target);
                    let backward = self.has_link(&c.reference, &rel.target)
                        && self.has_link(&c.target, &rel.source);
                    if !forward && !backward {
                        defects.push(ModelDefect::RelationshipScopeUnlinked {
                            constraint: c.id.clone(),
                            relationship: rel.id.clone(),
                        });
                    }
                }
            }
        }
        for id in self.scope.keys() {
            if !self.behavior.constraints.contains_key(id) {
                defects.push(ModelDefect::DanglingScope {
                    constraint: id.clone(),
                });
            }
        }
        defects
    }

    fn name_clashes(&self) -> Vec<ModelDefect> {
        let universes: [(Universe, Vec<&String>); 4] = [
            (Universe::Activity, self.behavior.activities.iter().collect()),
            (Universe::Constraint, self.behavior.constraints.keys().collect()),
            (Universe::Class, self.class_model.classes.iter().collect()),
            (
                Universe::Relationship,
                self.class_model.relationships.keys().collect(),
            ),
        ];
        let mut seen: BTreeMap<&String, Universe> = BTreeMap::new();
        let mut defects = Vec::new();
        for (universe, names) in &universes {
            for name in names {
                match seen.get(name) {
                    Some(first) => defects.push(ModelDefect::NameClash {
                        name: (*name).clone(),
                        first: *first,
                        second: *universe,
                    }),
                    None => {
                        seen.insert(name, *universe);
                    }
                }
            }
        }
        defects
    }
}

/// Shorthand for [`OcbcModel::validate`].
pub fn validate_model(model: &OcbcModel) -> Vec<ModelDefect> {
    model.validate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Universe {
    Activity,
    Constraint,
    Class,
    Relationship,
}

impl fmt::Display for Universe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Universe::Activity => "activity",
            Universe::Constraint => "constraint",
            Universe::Class => "class",
            Universe::Relationship => "relationship",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelDefect {
    #[error("`{name}` is both a {first} and a {second}")]
    NameClash {
        name: String,
        first: Universe,
        second: Universe,
    },
    #[error("duplicate {universe} `{name}`")]
    Duplicate { universe: Universe, name: String },
    #[error("{context} refers to undeclared activity `{activity}`")]
    UnknownActivity { context: String, activity: String },
    #[error("{context} refers to undeclared class `{class}`")]
    UnknownClass { context: String, class: String },
    #[error("constraint {constraint} has no scope")]
    MissingScope { constraint: String },
    #[error("scope entry for undeclared constraint {constraint}")]
    DanglingScope { constraint: String },
    #[error("constraint {constraint} is scoped by `{name}`, which is neither a class nor a relationship")]
    UnknownScope { constraint: String, name: String },
    #[error("constraint {constraint} is scoped by class {class} but ({activity}, {class}) is not linked")]
    ClassScopeUnlinked {
        constraint: String,
        activity: String,
        class: String,
    },
    #[error("constraint {constraint} is scoped by relationship {relationship}, which does not connect classes linked to its activities")]
    RelationshipScopeUnlinked {
        constraint: String,
        relationship: String,
    },
    #[error("{subject}: eventually {eventually} is not a subset of always {always}")]
    EventuallyNotSubset {
        subject: String,
        always: Cardinality,
        eventually: Cardinality,
    },
}

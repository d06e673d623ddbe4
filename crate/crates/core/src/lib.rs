//! Object-centric behavioral constraint (OCBC) models and conformance
//! checking of object-centric event logs against them.
//!
//! A model combines declarative behavioral constraints over activities with a
//! class model whose cardinalities constrain an evolving object model. Events
//! refer to objects, and constraints correlate events through those objects.
//! [`check_all`] reports the nine kinds of conformance problems such a log
//! can exhibit.

pub mod bc;
pub mod cardinality;
pub mod conformance;
pub mod constraint_type;
pub mod generator;
pub mod io;
pub mod log;
pub mod model;
pub mod report;

pub use bc::{evaluate_bc, expand_shorthand, BcVerdict, PairConstraint};
pub use generator::{generate_conforming, inject_violation, GenerateError, InjectError, Injection};
pub use cardinality::{parse_cardinality, CardRange, Cardinality, CardinalityError};
pub use conformance::{
    check_all, check_with, resolve_targets, CheckOptions, EventRef, Expected, Observed,
    ProblemKind, Severity, Subject, Violation,
};
pub use constraint_type::{builtin_constraint_type, ConstraintType, ConstraintTypeError, Template};
pub use log::{Event, EventLog, LogError, LogWarning, ObjectDelta, ObjectModel, Relation};
pub use model::{
    validate_model, AocLink, BcModel, ClassModel, Constraint, Modality, ModelDefect, OcbcModel,
    RelationshipType, Scope, Side,
};
pub use report::{aggregate, render_text, ConformanceReport};

//! Synthetic logs for testing: conforming logs produced by a seeded
//! simulation of the model, and logs with one injected violation.
//!
//! The simulation keeps every always-cardinality and every behavioral
//! constraint that could no longer be repaired intact at each emitted event,
//! and tracks the obligations that are still open: eventually-cardinalities
//! not yet reached and constraint verdicts not yet accepted. Once the
//! requested number of events is reached it only emits events that reduce
//! those obligations, and it stops when none remain.

mod inject;

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cardinality::Cardinality;
use crate::constraint_type::ConstraintType;
use crate::conformance::check_all;
use crate::log::{Event, EventLog, ObjectModel, Relation};
use crate::model::{ModelDefect, OcbcModel, Scope, Side};

pub use inject::{inject_violation, InjectError, Injection};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("the model has {} defect(s)", .0.len())]
    IllFormed(Vec<ModelDefect>),
    #[error(
        "no conforming log of about {target} events within {budget} events \
         after {attempts} attempts ({outstanding} obligations left in the last attempt)"
    )]
    BudgetExceeded {
        target: usize,
        budget: usize,
        attempts: usize,
        outstanding: i64,
    },
}

const ATTEMPTS: usize = 8;
const PROPOSALS_PER_ACTIVITY: usize = 3;
const SAMPLES: usize = 8;
const GREEDY_SAMPLING: f64 = 0.7;
const MAX_NEW_OBJECTS: usize = 12;
const STALL_LIMIT: usize = 50;
const LOOKAHEAD_WIDTH: usize = 12;
const LOOKAHEAD_LIMIT: usize = 2000;

/// Generates a log of roughly `events` events that conforms to `model`.
///
/// The result has at least `events` events unless the budget of
/// `2 * events + 200` events is exhausted first, in which case the attempt
/// is repeated. The same seed always yields the same log.
pub fn generate_conforming(model: &OcbcModel, events: usize, seed: u64) -> Result<EventLog, GenerateError> {
    let defects = model.validate();
    if !defects.is_empty() {
        return Err(GenerateError::IllFormed(defects));
    }
    let plan = Plan::new(model);
    let budget = events.saturating_mul(2).saturating_add(200);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outstanding = 0;
    for _ in 0..ATTEMPTS {
        let mut world = World::new(&plan);
        if world.run(&mut rng, events, budget) {
            let log = world.into_log();
            if check_all(model, &log).conforms {
                return Ok(log);
            }
        } else {
            outstanding = world.outstanding;
        }
    }
    Err(GenerateError::BudgetExceeded {
        target: events,
        budget,
        attempts: ATTEMPTS,
        outstanding,
    })
}

struct LinkInfo {
    activity: usize,
    class: usize,
    always: Cardinality,
    eventually: Cardinality,
    objects: Cardinality,
    /// Index of this link among the links of its class.
    slot: usize,
}

/// One end of a relationship type, seen from the objects whose number of
/// partners it bounds. Anchor `2 * r` is the source side of relationship `r`
/// and `2 * r + 1` its target side; `a ^ 1` is the opposite end.
struct AnchorInfo {
    rel: usize,
    side: Side,
    partner_class: usize,
    always: Cardinality,
    eventually: Cardinality,
    slot: usize,
}

enum GScope {
    Class(usize),
    Rel(usize),
}

struct ConstraintInfo {
    reference: usize,
    target: usize,
    ctype: ConstraintType,
    scope: GScope,
}

/// The model compiled to dense indices.
struct Plan {
    classes: Vec<String>,
    activities: Vec<String>,
    rel_ids: Vec<String>,
    links: Vec<LinkInfo>,
    links_of_class: Vec<Vec<usize>>,
    links_of_activity: Vec<Vec<usize>>,
    anchors: Vec<AnchorInfo>,
    anchors_of_class: Vec<Vec<usize>>,
    constraints: Vec<ConstraintInfo>,
}

impl Plan {
    fn new(model: &OcbcModel) -> Self {
        let classes: Vec<String> = model.class_model.classes.iter().cloned().collect();
        let class_idx: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let activities: Vec<String> = model.behavior.activities.iter().cloned().collect();
        let act_idx: HashMap<&str, usize> = activities.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();

        let mut links = Vec::new();
        let mut links_of_class = vec![Vec::new(); classes.len()];
        let mut links_of_activity = vec![Vec::new(); activities.len()];
        for link in model.links.values() {
            let (Some(&a), Some(&c)) = (act_idx.get(link.activity.as_str()), class_idx.get(link.class.as_str())) else {
                continue;
            };
            let id = links.len();
            links.push(LinkInfo {
                activity: a,
                class: c,
                always: link.events_always.clone(),
                eventually: link.events_eventually.clone(),
                objects: link.objects.clone(),
                slot: links_of_class[c].len(),
            });
            links_of_class[c].push(id);
            links_of_activity[a].push(id);
        }

        let mut rel_ids = Vec::new();
        let mut rel_idx = HashMap::new();
        let mut anchors = Vec::new();
        let mut anchors_of_class = vec![Vec::new(); classes.len()];
        for rel in model.class_model.relationships.values() {
            let r = rel_ids.len();
            rel_idx.insert(rel.id.as_str(), r);
            rel_ids.push(rel.id.clone());
            for side in [Side::Source, Side::Target] {
                let anchor_class = class_idx[rel.anchor_class(side)];
                let id = anchors.len();
                anchors.push(AnchorInfo {
                    rel: r,
                    side,
                    partner_class: class_idx[rel.class_at(side)],
                    always: rel.card(side, crate::model::Modality::Always).clone(),
                    eventually: rel.card(side, crate::model::Modality::Eventually).clone(),
                    slot: anchors_of_class[anchor_class].len(),
                });
                anchors_of_class[anchor_class].push(id);
            }
        }

        let constraints = model
            .behavior
            .constraints
            .values()
            .filter_map(|c| {
                let scope = match model.scope_of(&c.id)? {
                    Scope::Class(name) => GScope::Class(class_idx[name]),
                    Scope::Relationship(rel) => GScope::Rel(rel_idx[rel.id.as_str()]),
                };
                Some(ConstraintInfo {
                    reference: act_idx[c.reference.as_str()],
                    target: act_idx[c.target.as_str()],
                    ctype: c.ctype.clone(),
                    scope,
                })
            })
            .collect();

        Self {
            classes,
            activities,
            rel_ids,
            links,
            links_of_class,
            links_of_activity,
            anchors,
            anchors_of_class,
            constraints,
        }
    }

    /// Whether a new object of `class` is valid when the only event
    /// referring to it so far is one of `activity`, if any.
    fn creatable(&self, class: usize, activity: Option<usize>) -> bool {
        self.links_of_class[class].iter().all(|&l| {
            let link = &self.links[l];
            link.always.contains(u64::from(Some(link.activity) == activity))
        })
    }
}

/// A set supporting constant-time insertion, removal and uniform sampling.
#[derive(Clone, Default)]
struct Bag {
    items: Vec<usize>,
    index: HashMap<usize, usize>,
}

impl Bag {
    fn set(&mut self, x: usize, present: bool) {
        match (present, self.index.get(&x).copied()) {
            (true, None) => {
                self.index.insert(x, self.items.len());
                self.items.push(x);
            }
            (false, Some(i)) => {
                self.items.swap_remove(i);
                self.index.remove(&x);
                if let Some(&moved) = self.items.get(i) {
                    self.index.insert(moved, i);
                }
            }
            _ => {}
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        self.items.choose(rng).copied()
    }
}

#[derive(Clone)]
struct Obj {
    name: String,
    class: usize,
    link_counts: Vec<u32>,
    anchor_counts: Vec<u32>,
    partners: Vec<Vec<usize>>,
    events: Vec<usize>,
}

#[derive(Clone)]
struct GenEvent {
    activity: usize,
    refs: Vec<usize>,
    new_objects: Vec<usize>,
    new_relations: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Old(usize),
    New(usize),
}

#[derive(Clone, Default)]
struct Candidate {
    activity: usize,
    refs: Vec<Slot>,
    /// Classes of the objects this event creates.
    new_classes: Vec<usize>,
    /// `(rel, source, target)`
    relations: Vec<(usize, Slot, Slot)>,
    /// Relations added per object end in this candidate.
    added: HashMap<(Slot, usize), u32>,
}

impl Candidate {
    fn added(&self, slot: Slot, anchor: usize) -> u32 {
        self.added.get(&(slot, anchor)).copied().unwrap_or(0)
    }

    fn refers(&self, slot: Slot) -> bool {
        self.refs.contains(&slot)
    }
}

#[derive(Clone)]
struct Assessment {
    delta: i64,
    updates: Vec<((usize, usize), (u64, u64))>,
}

#[derive(Clone)]
struct World<'p> {
    plan: &'p Plan,
    objects: Vec<Obj>,
    events: Vec<GenEvent>,
    /// `(constraint, reference event)` to `(before, after)`.
    verdicts: HashMap<(usize, usize), (u64, u64)>,
    link_open: Vec<Bag>,
    link_deficit: Vec<Bag>,
    anchor_open: Vec<Bag>,
    anchor_deficit: Vec<Bag>,
    outstanding: i64,
}

impl<'p> World<'p> {
    fn new(plan: &'p Plan) -> Self {
        let bags = |n: usize| (0..n).map(|_| Bag::default()).collect::<Vec<_>>();
        Self {
            plan,
            objects: Vec::new(),
            events: Vec::new(),
            verdicts: HashMap::new(),
            link_open: bags(plan.links.len()),
            link_deficit: bags(plan.links.len()),
            anchor_open: bags(plan.anchors.len()),
            anchor_deficit: bags(plan.anchors.len()),
            outstanding: 0,
        }
    }

    fn run(&mut self, rng: &mut ChaCha8Rng, target: usize, budget: usize) -> bool {
        let mut stalled = 0;
        while self.events.len() < budget {
            if self.events.len() >= target && self.outstanding == 0 {
                return true;
            }
            let exploring = self.events.len() < target;
            let mut options: Vec<(Candidate, Assessment)> = Vec::new();
            for activity in 0..self.plan.activities.len() {
                let proposals = if exploring { PROPOSALS_PER_ACTIVITY } else { 3 * PROPOSALS_PER_ACTIVITY };
                for _ in 0..proposals {
                    if let Some(c) = self.propose(activity, rng) {
                        if let Some(a) = self.assess(&c) {
                            options.push((c, a));
                        }
                    }
                }
            }
            if options.is_empty() {
                stalled += 1;
                if stalled > STALL_LIMIT {
                    return false;
                }
                continue;
            }
            stalled = 0;
            let pick = if exploring {
                let weights: Vec<u32> = options
                    .iter()
                    .map(|(_, a)| match a.delta {
                        d if d < 0 => 4,
                        0 => 2,
                        _ => 1,
                    })
                    .collect();
                weighted_index(&weights, rng)
            } else {
                let best = options.iter().map(|(_, a)| a.delta).min().expect("options is non-empty");
                let pool: Vec<usize> = if best < 0 {
                    (0..options.len()).filter(|&i| options[i].1.delta == best).collect()
                } else if let Some(i) = self.lookahead(&options, rng) {
                    vec![i]
                } else {
                    let quiet: Vec<usize> = (0..options.len())
                        .filter(|&i| options[i].1.delta == 0 && options[i].0.new_classes.is_empty())
                        .collect();
                    if quiet.is_empty() || rng.gen_bool(0.5) {
                        // Nothing helps right now: take a step of a random
                        // activity, which may enable progress later.
                        let activity = options.choose(rng).expect("options is non-empty").0.activity;
                        (0..options.len()).filter(|&i| options[i].0.activity == activity).collect()
                    } else {
                        quiet
                    }
                };
                *pool.choose(rng).expect("pool is non-empty")
            };
            let (candidate, assessment) = options.swap_remove(pick);
            self.commit(candidate, assessment);
        }
        false
    }

    /// How far along `o` is: eventually-satisfied links, then events so far.
    fn maturity(&self, o: usize) -> (usize, usize) {
        let obj = &self.objects[o];
        let satisfied = self.plan.links_of_class[obj.class]
            .iter()
            .filter(|&&l| {
                let link = &self.plan.links[l];
                link.eventually.contains(u64::from(obj.link_counts[link.slot]))
            })
            .count();
        (satisfied, obj.events.len())
    }

    /// An option that enables a step reducing the obligations below their
    /// current level, found by trying a few options on a copy of the world.
    fn lookahead(&self, options: &[(Candidate, Assessment)], rng: &mut ChaCha8Rng) -> Option<usize> {
        if self.events.len() > LOOKAHEAD_LIMIT {
            return None;
        }
        let mut order: Vec<usize> = (0..options.len()).collect();
        order.shuffle(rng);
        let mut best: Option<(i64, usize)> = None;
        for &i in order.iter().take(LOOKAHEAD_WIDTH) {
            let (cand, assessment) = &options[i];
            let mut next = self.clone();
            next.commit(cand.clone(), assessment.clone());
            let follow = (0..self.plan.activities.len())
                .flat_map(|a| (0..PROPOSALS_PER_ACTIVITY).map(move |_| a))
                .filter_map(|a| next.propose(a, rng))
                .filter_map(|c| next.assess(&c))
                .map(|a| a.delta)
                .min();
            if let Some(d) = follow {
                let total = assessment.delta + d;
                if total < 0 && best.is_none_or(|(b, _)| total < b) {
                    best = Some((total, i));
                }
            }
        }
        best.map(|(_, i)| i)
    }

    /// Whether every link of `o` has reached its eventually-cardinality.
    fn settled(&self, o: usize) -> bool {
        let obj = &self.objects[o];
        self.plan.links_of_class[obj.class].iter().all(|&l| {
            let link = &self.plan.links[l];
            link.eventually.contains(u64::from(obj.link_counts[link.slot]))
        })
    }

    /// The most mature of a few sampled objects satisfying `ok`, preferring
    /// those in `first`. Now and then the first acceptable sample is taken
    /// instead, so that young objects owing a target event get picked too.
    fn sample_best(
        &self,
        first: &Bag,
        second: &Bag,
        rng: &mut ChaCha8Rng,
        ok: impl Fn(usize) -> bool,
    ) -> Option<usize> {
        let greedy = rng.gen_bool(GREEDY_SAMPLING);
        for bag in [first, second] {
            let mut sampled = (0..SAMPLES).filter_map(|_| bag.sample(rng)).filter(|&o| ok(o));
            let best = if greedy {
                sampled.max_by_key(|&o| self.maturity(o))
            } else {
                sampled.next()
            };
            if best.is_some() {
                return best;
            }
        }
        None
    }

    fn link_count(&self, o: usize, l: usize) -> u32 {
        self.objects[o].link_counts[self.plan.links[l].slot]
    }

    fn anchor_count(&self, o: usize, a: usize) -> u32 {
        self.objects[o].anchor_counts[self.plan.anchors[a].slot]
    }

    fn propose(&self, activity: usize, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let plan = self.plan;
        let mut cand = Candidate {
            activity,
            ..Candidate::default()
        };
        let mut primary = Vec::new();
        for &l in &plan.links_of_activity[activity] {
            let class = plan.links[l].class;
            let k = choose_count(&plan.links[l].objects, rng);
            let creatable = plan.creatable(class, Some(activity));
            for _ in 0..k {
                let existing = if creatable && rng.gen_bool(0.3) {
                    None
                } else {
                    self.sample_best(&self.link_deficit[l], &self.link_open[l], rng, |o| {
                        !cand.refers(Slot::Old(o))
                            && plan.links[l].always.contains(u64::from(self.link_count(o, l)) + 1)
                    })
                };
                match existing {
                    Some(o) => cand.refs.push(Slot::Old(o)),
                    None if creatable => {
                        let k = cand.new_classes.len();
                        cand.new_classes.push(class);
                        primary.push(true);
                        cand.refs.push(Slot::New(k));
                    }
                    None => return None,
                }
            }
        }

        let mut k = 0;
        while k < cand.new_classes.len() {
            let class = cand.new_classes[k];
            let me = Slot::New(k);
            for &a in &plan.anchors_of_class[class] {
                let anchor = &plan.anchors[a];
                let mut want = anchor.always.lower_bound();
                if primary[k]
                    && anchor.always == anchor.eventually
                    && anchor.always.contains(u64::from(want) + 1)
                    && rng.gen_bool(0.4)
                {
                    want += 1;
                }
                let required = anchor.always.lower_bound();
                let mut chosen: HashSet<Slot> = HashSet::new();
                while cand.added(me, a) < want {
                    let opposite = a ^ 1;
                    // Optional partners must be done with their own events, or
                    // constraints correlated through this relation may become
                    // unreachable.
                    let optional = cand.added(me, a) >= required;
                    let partner = self
                        .sample_best(&self.anchor_deficit[opposite], &self.anchor_open[opposite], rng, |o| {
                            !chosen.contains(&Slot::Old(o))
                                && (!optional || self.settled(o))
                                && plan.anchors[opposite].always.contains(
                                    u64::from(self.anchor_count(o, opposite) + cand.added(Slot::Old(o), opposite)) + 1,
                                )
                        })
                        .map(Slot::Old);
                    let partner = match partner {
                        Some(p) => p,
                        None if optional => break,
                        None if cand.new_classes.len() < MAX_NEW_OBJECTS
                            && plan.creatable(anchor.partner_class, None) =>
                        {
                            let n = cand.new_classes.len();
                            cand.new_classes.push(anchor.partner_class);
                            primary.push(false);
                            Slot::New(n)
                        }
                        None => return None,
                    };
                    if let Slot::Old(o) = partner {
                        if !self.settled(o) {
                            want = want.min(required);
                        }
                    }
                    chosen.insert(partner);
                    let (source, target) = match anchor.side {
                        Side::Target => (me, partner),
                        Side::Source => (partner, me),
                    };
                    cand.relations.push((anchor.rel, source, target));
                    *cand.added.entry((me, a)).or_default() += 1;
                    *cand.added.entry((partner, opposite)).or_default() += 1;
                }
            }
            k += 1;
        }
        Some(cand)
    }

    /// Existing events of `activity` correlated with the candidate event
    /// under the scope of constraint `ci`.
    fn correlated(&self, cand: &Candidate, ci: usize, activity: usize) -> HashSet<usize> {
        let mut out = HashSet::new();
        let hit = |o: usize, out: &mut HashSet<usize>| {
            out.extend(
                self.objects[o]
                    .events
                    .iter()
                    .copied()
                    .filter(|&e| self.events[e].activity == activity),
            );
        };
        match self.plan.constraints[ci].scope {
            GScope::Class(class) => {
                for &slot in &cand.refs {
                    if let Slot::Old(o) = slot {
                        if self.objects[o].class == class {
                            hit(o, &mut out);
                        }
                    }
                }
            }
            GScope::Rel(rel) => {
                for &slot in &cand.refs {
                    if let Slot::Old(o) = slot {
                        let obj = &self.objects[o];
                        for &a in &self.plan.anchors_of_class[obj.class] {
                            if self.plan.anchors[a].rel == rel {
                                for &p in &obj.partners[self.plan.anchors[a].slot] {
                                    hit(p, &mut out);
                                }
                            }
                        }
                    }
                    for &(r, s, t) in &cand.relations {
                        if r != rel {
                            continue;
                        }
                        let other = if s == slot {
                            t
                        } else if t == slot {
                            s
                        } else {
                            continue;
                        };
                        if let Slot::Old(p) = other {
                            hit(p, &mut out);
                        }
                    }
                }
            }
        }
        out
    }

    /// Whether emitting the candidate as a reference event of constraint
    /// `ci` that admits no further target events would strand an object it
    /// refers to, which still needs partners or events through the
    /// constraint's scope.
    fn starves(&self, cand: &Candidate, ci: usize) -> bool {
        let plan = self.plan;
        let c = &plan.constraints[ci];
        cand.refs.iter().any(|&slot| {
            let (class, links, anchors) = match slot {
                Slot::Old(o) => {
                    let obj = &self.objects[o];
                    (obj.class, Some(&obj.link_counts), Some(&obj.anchor_counts))
                }
                Slot::New(k) => (cand.new_classes[k], None, None),
            };
            match c.scope {
                GScope::Class(scope) => {
                    scope == class
                        && plan.links_of_class[class].iter().any(|&l| {
                            let link = &plan.links[l];
                            let n = links.map_or(0, |counts| counts[link.slot])
                                + u32::from(link.activity == cand.activity);
                            link.activity == c.target && n < link.eventually.lower_bound()
                        })
                }
                GScope::Rel(rel) => plan.anchors_of_class[class].iter().any(|&a| {
                    let anchor = &plan.anchors[a];
                    let n = anchors.map_or(0, |counts| counts[anchor.slot]) + cand.added(slot, a);
                    anchor.rel == rel && n < anchor.eventually.lower_bound()
                }),
            }
        })
    }

    /// The change in open obligations if the candidate were emitted, or
    /// `None` if it would break something that can no longer be repaired.
    fn assess(&self, cand: &Candidate) -> Option<Assessment> {
        let plan = self.plan;
        let mut delta: i64 = 0;
        let deficit = |card: &Cardinality, n: u64| i64::from(!card.contains(n));

        for &slot in &cand.refs {
            if let Slot::Old(o) = slot {
                let class = self.objects[o].class;
                let l = *plan.links_of_class[class]
                    .iter()
                    .find(|&&l| plan.links[l].activity == cand.activity)?;
                let link = &plan.links[l];
                let n = u64::from(self.link_count(o, l));
                if !link.always.contains(n + 1) {
                    return None;
                }
                delta += deficit(&link.eventually, n + 1) - deficit(&link.eventually, n);
            }
        }
        for (k, &class) in cand.new_classes.iter().enumerate() {
            let referenced = cand.refers(Slot::New(k));
            for &l in &plan.links_of_class[class] {
                let link = &plan.links[l];
                let n = u64::from(referenced && link.activity == cand.activity);
                if !link.always.contains(n) {
                    return None;
                }
                delta += deficit(&link.eventually, n);
            }
            for &a in &plan.anchors_of_class[class] {
                let anchor = &plan.anchors[a];
                let n = u64::from(cand.added(Slot::New(k), a));
                if !anchor.always.contains(n) {
                    return None;
                }
                delta += deficit(&anchor.eventually, n);
            }
        }
        for (&(slot, a), &extra) in &cand.added {
            if let Slot::Old(o) = slot {
                let anchor = &plan.anchors[a];
                let n = u64::from(self.anchor_count(o, a));
                let m = n + u64::from(extra);
                if !anchor.always.contains(m) {
                    return None;
                }
                delta += deficit(&anchor.eventually, m) - deficit(&anchor.eventually, n);
            }
        }

        let mut updates = Vec::new();
        let here = self.events.len();
        for (ci, c) in plan.constraints.iter().enumerate() {
            if c.target == cand.activity {
                for e in self.correlated(cand, ci, c.reference) {
                    let (before, after) = self.verdicts[&(ci, e)];
                    if !c.ctype.satisfiable_later(before, after + 1) {
                        return None;
                    }
                    delta += i64::from(!c.ctype.accepts(before, after + 1)) - i64::from(!c.ctype.accepts(before, after));
                    updates.push(((ci, e), (before, after + 1)));
                }
            }
            if c.reference == cand.activity {
                let before = self.correlated(cand, ci, c.target).len() as u64;
                if !c.ctype.satisfiable_later(before, 0) {
                    return None;
                }
                if !c.ctype.satisfiable_later(before, 1) && self.starves(cand, ci) {
                    return None;
                }
                delta += i64::from(!c.ctype.accepts(before, 0));
                updates.push(((ci, here), (before, 0)));
            }
        }
        Some(Assessment { delta, updates })
    }

    fn commit(&mut self, cand: Candidate, assessment: Assessment) {
        let plan = self.plan;
        let here = self.events.len();
        let mut ids = Vec::with_capacity(cand.new_classes.len());
        for &class in &cand.new_classes {
            let o = self.objects.len();
            let name = format!("{}-{}", plan.classes[class].replace(char::is_whitespace, "-"), o + 1);
            self.objects.push(Obj {
                name,
                class,
                link_counts: vec![0; plan.links_of_class[class].len()],
                anchor_counts: vec![0; plan.anchors_of_class[class].len()],
                partners: vec![Vec::new(); plan.anchors_of_class[class].len()],
                events: Vec::new(),
            });
            ids.push(o);
            for &l in &plan.links_of_class[class] {
                self.refresh_link(o, l);
            }
            for &a in &plan.anchors_of_class[class] {
                self.refresh_anchor(o, a);
            }
        }
        let resolve = |slot: Slot| match slot {
            Slot::Old(o) => o,
            Slot::New(k) => ids[k],
        };

        let mut relations = Vec::with_capacity(cand.relations.len());
        for &(rel, s, t) in &cand.relations {
            let (s, t) = (resolve(s), resolve(t));
            relations.push((rel, s, t));
            // The source object counts targets at the target-side anchor.
            self.connect(s, 2 * rel + 1, t);
            self.connect(t, 2 * rel, s);
        }

        let refs: Vec<usize> = cand.refs.iter().map(|&s| resolve(s)).collect();
        for &o in &refs {
            let class = self.objects[o].class;
            let l = *plan.links_of_class[class]
                .iter()
                .find(|&&l| plan.links[l].activity == cand.activity)
                .expect("candidate only refers to linked classes");
            self.objects[o].link_counts[plan.links[l].slot] += 1;
            self.objects[o].events.push(here);
            self.refresh_link(o, l);
        }

        for (key, value) in assessment.updates {
            self.verdicts.insert(key, value);
        }
        self.outstanding += assessment.delta;
        self.events.push(GenEvent {
            activity: cand.activity,
            refs,
            new_objects: ids,
            new_relations: relations,
        });
    }

    fn connect(&mut self, o: usize, a: usize, partner: usize) {
        let slot = self.plan.anchors[a].slot;
        self.objects[o].anchor_counts[slot] += 1;
        self.objects[o].partners[slot].push(partner);
        self.refresh_anchor(o, a);
    }

    fn refresh_link(&mut self, o: usize, l: usize) {
        let n = u64::from(self.link_count(o, l));
        let link = &self.plan.links[l];
        self.link_open[l].set(o, link.always.contains(n + 1));
        self.link_deficit[l].set(o, !link.eventually.contains(n));
    }

    fn refresh_anchor(&mut self, o: usize, a: usize) {
        let n = u64::from(self.anchor_count(o, a));
        let anchor = &self.plan.anchors[a];
        self.anchor_open[a].set(o, anchor.always.contains(n + 1));
        self.anchor_deficit[a].set(o, !anchor.eventually.contains(n));
    }

    fn into_log(self) -> EventLog {
        let plan = self.plan;
        let name = |o: usize| self.objects[o].name.clone();
        let events = self
            .events
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mut event = Event::new(format!("e{}", i + 1), i as u64 + 1, plan.activities[e.activity].clone())
                    .with_objects(e.refs.iter().map(|&o| name(o)));
                for &o in &e.new_objects {
                    event = event.creating(name(o), plan.classes[self.objects[o].class].clone());
                }
                for &(r, s, t) in &e.new_relations {
                    event = event.relating(Relation::new(plan.rel_ids[r].clone(), name(s), name(t)));
                }
                event
            })
            .collect();
        EventLog::new(ObjectModel::default(), events).expect("generated deltas replay")
    }
}

/// A number of objects per event from `card`, preferring one.
fn choose_count(card: &Cardinality, rng: &mut ChaCha8Rng) -> u32 {
    if card.contains(1) && rng.gen_bool(0.7) {
        return 1;
    }
    let low = card.lower_bound();
    let options: Vec<u32> = (low..=low + 3).filter(|&n| card.contains(u64::from(n))).collect();
    options.choose(rng).copied().unwrap_or(low)
}

fn weighted_index(weights: &[u32], rng: &mut ChaCha8Rng) -> usize {
    let total: u32 = weights.iter().sum();
    let mut ticket = rng.gen_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        if ticket < w {
            return i;
        }
        ticket -= w;
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AocLink, RelationshipType};

    fn ticket_model() -> OcbcModel {
        let mut m = OcbcModel::default();
        m.behavior.add_activity("pay");
        m.class_model.add_class("ticket");
        let mut link = AocLink::new("pay", "ticket");
        link.events_always = Cardinality::between(0, 1);
        link.events_eventually = Cardinality::exactly(1);
        link.objects = Cardinality::at_least(1);
        m.add_link(link);
        m
    }

    #[test]
    fn bag_tracks_membership() {
        let mut bag = Bag::default();
        bag.set(3, true);
        bag.set(5, true);
        bag.set(3, false);
        bag.set(5, true);
        assert_eq!(bag.items, vec![5]);
        assert_eq!(bag.index[&5], 0);
    }

    #[test]
    fn pays_every_ticket_once() {
        let m = ticket_model();
        for seed in 0..20 {
            let log = generate_conforming(&m, 15, seed).unwrap();
            assert!(log.len() >= 15);
            assert!(check_all(&m, &log).conforms);
        }
    }

    #[test]
    fn same_seed_same_log() {
        let m = ticket_model();
        assert_eq!(generate_conforming(&m, 10, 4).unwrap(), generate_conforming(&m, 10, 4).unwrap());
    }

    #[test]
    fn zero_events_without_obligations_is_empty() {
        let mut m = ticket_model();
        m.class_model
            .add_relationship(RelationshipType::new("holds", "ticket", "ticket"));
        let log = generate_conforming(&m, 0, 1).unwrap();
        assert!(log.is_empty());
    }
}

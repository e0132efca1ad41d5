//! Symbolic household world: objects with capability flags, a robot with a
//! single gripper, and instantaneous primitive actions with precondition
//! checks. Goals are conjunctions of (possibly negated) predicates.

mod exec;
mod task;

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use exec::{execute, ExecError, ExecutionTrace, Step, StepOutcome};
pub use task::{load_task, load_task_dir, parse_task, Difficulty, SchemaError, TaskBundle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    #[serde(default)]
    pub openable: bool,
    #[serde(default)]
    pub toggleable: bool,
    #[serde(default)]
    pub container: bool,
    #[serde(default)]
    pub surface: bool,
    #[serde(default)]
    pub initially_open: bool,
}

impl ObjectSpec {
    pub fn new(id: impl Into<String>) -> Self {
        ObjectSpec {
            id: id.into(),
            openable: false,
            toggleable: false,
            container: false,
            surface: false,
            initially_open: false,
        }
    }

    pub fn openable(mut self) -> Self {
        self.openable = true;
        self
    }

    pub fn toggleable(mut self) -> Self {
        self.toggleable = true;
        self
    }

    pub fn container(mut self) -> Self {
        self.container = true;
        self
    }

    pub fn surface(mut self) -> Self {
        self.surface = true;
        self
    }

    pub fn open(mut self) -> Self {
        self.openable = true;
        self.initially_open = true;
        self
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("object `{0}` is defined more than once")]
    DuplicateObject(String),
    #[error("object `{0}` is initially open but not openable")]
    NotOpenable(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
}

/// Immutable object registry of one world.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct World {
    objects: IndexMap<String, ObjectSpec>,
}

impl World {
    pub fn new(objects: impl IntoIterator<Item = ObjectSpec>) -> Result<Self, WorldError> {
        let mut map = IndexMap::new();
        for obj in objects {
            if obj.initially_open && !obj.openable {
                return Err(WorldError::NotOpenable(obj.id));
            }
            if map.contains_key(&obj.id) {
                return Err(WorldError::DuplicateObject(obj.id));
            }
            map.insert(obj.id.clone(), obj);
        }
        Ok(World { objects: map })
    }

    pub fn get(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.objects.contains_key(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectSpec> {
        self.objects.values()
    }

    /// Initial state with every `initially_open` object open and nothing else set.
    pub fn initial_state(&self) -> WorldState {
        WorldState {
            open: self
                .objects()
                .filter(|o| o.initially_open)
                .map(|o| o.id.clone())
                .collect(),
            ..WorldState::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Inside,
    Ontop,
    Nextto,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub subject: String,
    pub reference: String,
}

impl Relation {
    pub fn new(kind: RelationKind, subject: impl Into<String>, reference: impl Into<String>) -> Self {
        Relation {
            kind,
            subject: subject.into(),
            reference: reference.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub near: Option<String>,
    pub held: Option<String>,
    pub open: BTreeSet<String>,
    pub toggled: BTreeSet<String>,
    pub relations: BTreeSet<Relation>,
}

impl WorldState {
    /// Adds a relation; `nextto` is stored in both directions.
    pub fn relate(&mut self, kind: RelationKind, subject: &str, reference: &str) {
        self.relations.insert(Relation::new(kind, subject, reference));
        if kind == RelationKind::Nextto {
            self.relations.insert(Relation::new(kind, reference, subject));
        }
    }

    pub fn has(&self, kind: RelationKind, subject: &str, reference: &str) -> bool {
        self.relations.contains(&Relation::new(kind, subject, reference))
    }

    /// The inside/ontop parent of `id`, if any.
    pub fn parent(&self, id: &str) -> Option<&Relation> {
        self.relations
            .iter()
            .find(|r| r.subject == id && r.kind != RelationKind::Nextto)
    }

    /// Removes every relation in which `id` is the subject, and every
    /// adjacency it takes part in. Objects resting on or inside `id` stay put.
    fn detach(&mut self, id: &str) {
        self.relations
            .retain(|r| r.subject != id && !(r.kind == RelationKind::Nextto && r.reference == id));
    }

    /// Checks the structural invariants against a registry, returning a
    /// description of the first violation.
    pub fn check(&self, world: &World) -> Result<(), String> {
        let known = |id: &str| {
            if world.contains(id) {
                Ok(())
            } else {
                Err(format!("unknown object `{id}`"))
            }
        };
        for id in self.near.iter().chain(self.held.iter()) {
            known(id)?;
        }
        for id in &self.open {
            known(id)?;
            if !world.get(id).is_some_and(|o| o.openable) {
                return Err(format!("`{id}` is open but not openable"));
            }
        }
        for id in &self.toggled {
            known(id)?;
            if !world.get(id).is_some_and(|o| o.toggleable) {
                return Err(format!("`{id}` is toggled but not toggleable"));
            }
        }
        let mut parents = BTreeSet::new();
        for r in &self.relations {
            known(&r.subject)?;
            known(&r.reference)?;
            if r.subject == r.reference {
                return Err(format!("`{}` is related to itself", r.subject));
            }
            if r.kind == RelationKind::Nextto {
                if !self.has(RelationKind::Nextto, &r.reference, &r.subject) {
                    return Err(format!("nextto({}, {}) is not symmetric", r.subject, r.reference));
                }
            } else if !parents.insert(r.subject.as_str()) {
                return Err(format!("`{}` has more than one parent", r.subject));
            }
            if self.held.as_deref() == Some(r.subject.as_str())
                || (r.kind == RelationKind::Nextto && self.held.as_deref() == Some(r.reference.as_str()))
            {
                return Err(format!("held object `{}` is in a spatial relation", r.subject));
            }
        }
        Ok(())
    }
}

/// Symbolic primitives with defined semantics. `GRAB` and `PICK` alias `GRASP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    NavigateTo,
    Grasp,
    PlaceOnTop,
    PlaceInside,
    PlaceNextTo,
    Open,
    Close,
    ToggleOn,
    ToggleOff,
}

impl Primitive {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "NAVIGATE_TO" => Primitive::NavigateTo,
            "GRASP" | "GRAB" | "PICK" => Primitive::Grasp,
            "PLACE_ON_TOP" => Primitive::PlaceOnTop,
            "PLACE_INSIDE" => Primitive::PlaceInside,
            "PLACE_NEXT_TO" => Primitive::PlaceNextTo,
            "OPEN" => Primitive::Open,
            "CLOSE" => Primitive::Close,
            "TOGGLE_ON" => Primitive::ToggleOn,
            "TOGGLE_OFF" => Primitive::ToggleOff,
            _ => return None,
        })
    }

    pub fn is_placement(self) -> bool {
        matches!(
            self,
            Primitive::PlaceOnTop | Primitive::PlaceInside | Primitive::PlaceNextTo
        )
    }
}

/// Machine-readable reason a primitive's precondition did not hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureReason {
    HandsFull,
    NotNear,
    Occluded,
    EmptyHand,
    ClosedContainer,
    NotSurface,
    NotContainer,
    NotOpenable,
    NotToggleable,
    SelfPlacement,
    ItemMismatch,
}

impl FailureReason {
    pub const ALL: [FailureReason; 11] = [
        FailureReason::HandsFull,
        FailureReason::NotNear,
        FailureReason::Occluded,
        FailureReason::EmptyHand,
        FailureReason::ClosedContainer,
        FailureReason::NotSurface,
        FailureReason::NotContainer,
        FailureReason::NotOpenable,
        FailureReason::NotToggleable,
        FailureReason::SelfPlacement,
        FailureReason::ItemMismatch,
    ];

    pub fn code(self) -> &'static str {
        match self {
            FailureReason::HandsFull => "HANDS_FULL",
            FailureReason::NotNear => "NOT_NEAR",
            FailureReason::Occluded => "OCCLUDED",
            FailureReason::EmptyHand => "EMPTY_HAND",
            FailureReason::ClosedContainer => "CLOSED_CONTAINER",
            FailureReason::NotSurface => "NOT_SURFACE",
            FailureReason::NotContainer => "NOT_CONTAINER",
            FailureReason::NotOpenable => "NOT_OPENABLE",
            FailureReason::NotToggleable => "NOT_TOGGLEABLE",
            FailureReason::SelfPlacement => "SELF_PLACEMENT",
            FailureReason::ItemMismatch => "ITEM_MISMATCH",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ApplyError {
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("primitive `{0}` has no symbolic semantics")]
    UnknownPrimitive(String),
    #[error("precondition failed: {0}")]
    Precondition(FailureReason),
}

impl ApplyError {
    pub fn code(&self) -> &'static str {
        match self {
            ApplyError::UnknownObject(_) => "UNKNOWN_OBJECT",
            ApplyError::UnknownPrimitive(_) => "UNKNOWN_PRIMITIVE",
            ApplyError::Precondition(r) => r.code(),
        }
    }
}

fn require(ok: bool, reason: FailureReason) -> Result<(), ApplyError> {
    if ok {
        Ok(())
    } else {
        Err(ApplyError::Precondition(reason))
    }
}

/// Applies one primitive to `state`, returning the successor state.
pub fn apply(state: &WorldState, action_id: &str, obj: &str, world: &World) -> Result<WorldState, ApplyError> {
    apply_with_item(state, action_id, obj, None, world)
}

/// [`apply`] for placements that also name the manipulated object (`item`),
/// which must be the object currently held.
pub fn apply_with_item(
    state: &WorldState,
    action_id: &str,
    obj: &str,
    item: Option<&str>,
    world: &World,
) -> Result<WorldState, ApplyError> {
    let primitive =
        Primitive::from_name(action_id).ok_or_else(|| ApplyError::UnknownPrimitive(action_id.to_string()))?;
    let spec = world
        .get(obj)
        .ok_or_else(|| ApplyError::UnknownObject(obj.to_string()))?;
    let mut next = state.clone();
    let near = state.near.as_deref() == Some(obj);

    match primitive {
        Primitive::NavigateTo => next.near = Some(obj.to_string()),
        Primitive::Grasp => {
            require(state.held.is_none(), FailureReason::HandsFull)?;
            require(near, FailureReason::NotNear)?;
            require(!is_enclosed(state, obj, world), FailureReason::Occluded)?;
            next.detach(obj);
            next.held = Some(obj.to_string());
        }
        Primitive::PlaceOnTop | Primitive::PlaceInside | Primitive::PlaceNextTo => {
            let held = state
                .held
                .as_deref()
                .ok_or(ApplyError::Precondition(FailureReason::EmptyHand))?;
            if let Some(item) = item {
                if !world.contains(item) {
                    return Err(ApplyError::UnknownObject(item.to_string()));
                }
                require(item == held, FailureReason::ItemMismatch)?;
            }
            require(near, FailureReason::NotNear)?;
            require(held != obj, FailureReason::SelfPlacement)?;
            let kind = match primitive {
                Primitive::PlaceOnTop => {
                    require(spec.surface || spec.container, FailureReason::NotSurface)?;
                    RelationKind::Ontop
                }
                Primitive::PlaceInside => {
                    require(spec.container, FailureReason::NotContainer)?;
                    require(
                        !spec.openable || state.open.contains(obj),
                        FailureReason::ClosedContainer,
                    )?;
                    RelationKind::Inside
                }
                _ => RelationKind::Nextto,
            };
            next.relate(kind, held, obj);
            next.held = None;
        }
        Primitive::Open | Primitive::Close => {
            require(state.held.is_none(), FailureReason::HandsFull)?;
            require(near, FailureReason::NotNear)?;
            require(spec.openable, FailureReason::NotOpenable)?;
            if primitive == Primitive::Open {
                next.open.insert(obj.to_string());
            } else {
                next.open.remove(obj);
            }
        }
        Primitive::ToggleOn | Primitive::ToggleOff => {
            require(near, FailureReason::NotNear)?;
            require(spec.toggleable, FailureReason::NotToggleable)?;
            if primitive == Primitive::ToggleOn {
                next.toggled.insert(obj.to_string());
            } else {
                next.toggled.remove(obj);
            }
        }
    }
    Ok(next)
}

/// True when some container enclosing `obj` (directly or transitively) is closed.
fn is_enclosed(state: &WorldState, obj: &str, world: &World) -> bool {
    let mut current = obj;
    let mut seen = BTreeSet::new();
    while let Some(parent) = state.parent(current) {
        if parent.kind != RelationKind::Inside || !seen.insert(parent.reference.as_str()) {
            break;
        }
        let container = parent.reference.as_str();
        if world.get(container).is_some_and(|c| c.openable) && !state.open.contains(container) {
            return true;
        }
        current = container;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Inside,
    Ontop,
    Nextto,
    Open,
    ToggledOn,
}

impl PredicateKind {
    pub fn is_binary(self) -> bool {
        matches!(
            self,
            PredicateKind::Inside | PredicateKind::Ontop | PredicateKind::Nextto
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            PredicateKind::Inside => "inside",
            PredicateKind::Ontop => "ontop",
            PredicateKind::Nextto => "nextto",
            PredicateKind::Open => "open",
            PredicateKind::ToggledOn => "toggled_on",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub negated: bool,
    pub kind: PredicateKind,
    pub subject: String,
    pub reference: Option<String>,
}

impl Predicate {
    pub fn unary(kind: PredicateKind, subject: impl Into<String>) -> Self {
        Predicate {
            negated: false,
            kind,
            subject: subject.into(),
            reference: None,
        }
    }

    pub fn binary(kind: PredicateKind, subject: impl Into<String>, reference: impl Into<String>) -> Self {
        Predicate {
            negated: false,
            kind,
            subject: subject.into(),
            reference: Some(reference.into()),
        }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    /// Evaluates the predicate (including negation) against `state`.
    pub fn holds(&self, state: &WorldState) -> bool {
        let reference = self.reference.as_deref().unwrap_or("");
        let raw = match self.kind {
            PredicateKind::Inside => state.has(RelationKind::Inside, &self.subject, reference),
            PredicateKind::Ontop => state.has(RelationKind::Ontop, &self.subject, reference),
            PredicateKind::Nextto => state.has(RelationKind::Nextto, &self.subject, reference),
            PredicateKind::Open => state.open.contains(&self.subject),
            PredicateKind::ToggledOn => state.toggled.contains(&self.subject),
        };
        raw != self.negated
    }

    fn objects(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.subject.as_str()).chain(self.reference.as_deref())
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        match &self.reference {
            Some(r) => write!(f, "{}({}, {})", self.kind.name(), self.subject, r),
            None => write!(f, "{}({})", self.kind.name(), self.subject),
        }
    }
}

/// A conjunction of predicates; satisfied only when every one holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub predicates: Vec<Predicate>,
}

impl GoalSpec {
    pub fn new(predicates: Vec<Predicate>) -> Self {
        GoalSpec { predicates }
    }

    /// Predicates that do not hold in `state`.
    pub fn unsatisfied<'a>(&'a self, state: &'a WorldState) -> impl Iterator<Item = &'a Predicate> {
        self.predicates.iter().filter(|p| !p.holds(state))
    }
}

/// All-or-nothing goal check.
pub fn check_goals(state: &WorldState, goal: &GoalSpec, world: &World) -> Result<bool, WorldError> {
    for id in goal.predicates.iter().flat_map(Predicate::objects) {
        if !world.contains(id) {
            return Err(WorldError::UnknownObject(id.to_string()));
        }
    }
    Ok(goal.predicates.iter().all(|p| p.holds(state)))
}

//! Task bundle files.
//!
//! One YAML document per task:
//!
//! ```yaml
//! name: turning_on_radio
//! difficulty: Easy            # Easy | Medium | Hard
//! type: State-change          # free-form category
//! instruction: Turn on the radio.
//! allowed_actions: [NAVIGATE_TO, TOGGLE_ON]
//! workflow:                   # optional numbered decomposition
//!   - Navigate to the radio.
//!   - Toggle the radio on.
//! image: radio.png            # optional scene image, relative to the file
//! objects:
//!   - {id: radio, toggleable: true}
//!   - {id: table, surface: true}
//! initial_state:              # every field optional
//!   near: null
//!   held: null
//!   open: []
//!   toggled: []
//!   relations:
//!     - {pred: ontop, args: [radio, table]}
//! goal:
//!   - {pred: toggled_on, args: [radio]}
//!   - {pred: open, args: [fridge], not: true}
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GoalSpec, ObjectSpec, Predicate, PredicateKind, RelationKind, World, WorldError, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl SchemaError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    /// The field path the error refers to, when it has one.
    pub fn field_path(&self) -> Option<&str> {
        match self {
            SchemaError::Invalid { path, .. } => Some(path),
            SchemaError::Io(..) => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    name: String,
    difficulty: Difficulty,
    #[serde(rename = "type", default)]
    task_type: String,
    instruction: String,
    allowed_actions: Vec<String>,
    #[serde(default)]
    workflow: Option<Vec<String>>,
    #[serde(default)]
    image: Option<String>,
    objects: Vec<ObjectSpec>,
    #[serde(default)]
    initial_state: RawState,
    goal: Vec<RawPredicate>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    #[serde(default)]
    near: Option<String>,
    #[serde(default)]
    held: Option<String>,
    #[serde(default)]
    open: Vec<String>,
    #[serde(default)]
    toggled: Vec<String>,
    #[serde(default)]
    relations: Vec<RawPredicate>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredicate {
    pred: PredicateKind,
    args: Vec<String>,
    #[serde(rename = "not", default)]
    negated: bool,
}

/// Everything needed to run one task: registry, start state, goal and prompt fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskBundle {
    pub name: String,
    pub difficulty: Difficulty,
    pub task_type: String,
    pub instruction: String,
    pub allowed_actions: Vec<String>,
    pub workflow: Option<Vec<String>>,
    pub image: Option<PathBuf>,
    pub world: World,
    pub initial: WorldState,
    pub goal: GoalSpec,
}

impl TaskBundle {
    /// The instruction with the numbered workflow appended, if the task has one.
    pub fn prompt(&self, chain_of_thought: bool) -> String {
        match (&self.workflow, chain_of_thought) {
            (Some(steps), true) => {
                let mut out = format!("{}\nWorkflow:", self.instruction);
                for (i, step) in steps.iter().enumerate() {
                    out.push_str(&format!("\n{}. {}", i + 1, step));
                }
                out
            }
            _ => self.instruction.clone(),
        }
    }

    pub fn allowed_set(&self) -> BTreeSet<String> {
        self.allowed_actions.iter().cloned().collect()
    }
}

fn predicate(raw: &RawPredicate, path: &str, world: &World) -> Result<Predicate, SchemaError> {
    let arity = if raw.pred.is_binary() { 2 } else { 1 };
    if raw.args.len() != arity {
        return Err(SchemaError::at(
            format!("{path}.args"),
            format!(
                "`{}` takes {arity} argument(s), found {}",
                raw.pred.name(),
                raw.args.len()
            ),
        ));
    }
    for (i, id) in raw.args.iter().enumerate() {
        if !world.contains(id) {
            return Err(SchemaError::at(
                format!("{path}.args[{i}]"),
                format!("undefined object `{id}`"),
            ));
        }
    }
    Ok(Predicate {
        negated: raw.negated,
        kind: raw.pred,
        subject: raw.args[0].clone(),
        reference: raw.args.get(1).cloned(),
    })
}

/// Parses a task document; `base` resolves the optional image path.
pub fn parse_task(text: &str, base: Option<&Path>) -> Result<TaskBundle, SchemaError> {
    let de = serde_yaml::Deserializer::from_str(text);
    let raw: RawTask = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::at(
            if path == "." { String::new() } else { path },
            e.into_inner().to_string(),
        )
    })?;

    for (field, value) in [("name", &raw.name), ("instruction", &raw.instruction)] {
        if value.trim().is_empty() {
            return Err(SchemaError::at(field, "must not be empty"));
        }
    }
    let world = World::new(raw.objects).map_err(|e| match e {
        WorldError::DuplicateObject(id) => SchemaError::at("objects", format!("duplicate object `{id}`")),
        other => SchemaError::at("objects", other.to_string()),
    })?;

    let mut initial = world.initial_state();
    let state = &raw.initial_state;
    for (field, value) in [("near", &state.near), ("held", &state.held)] {
        if let Some(id) = value {
            if !world.contains(id) {
                return Err(SchemaError::at(
                    format!("initial_state.{field}"),
                    format!("undefined object `{id}`"),
                ));
            }
        }
    }
    initial.near = state.near.clone();
    initial.held = state.held.clone();
    for (i, id) in state.open.iter().enumerate() {
        match world.get(id) {
            Some(o) if o.openable => {
                initial.open.insert(id.clone());
            }
            Some(_) => {
                return Err(SchemaError::at(
                    format!("initial_state.open[{i}]"),
                    format!("`{id}` is not openable"),
                ))
            }
            None => {
                return Err(SchemaError::at(
                    format!("initial_state.open[{i}]"),
                    format!("undefined object `{id}`"),
                ))
            }
        }
    }
    for (i, id) in state.toggled.iter().enumerate() {
        match world.get(id) {
            Some(o) if o.toggleable => {
                initial.toggled.insert(id.clone());
            }
            Some(_) => {
                return Err(SchemaError::at(
                    format!("initial_state.toggled[{i}]"),
                    format!("`{id}` is not toggleable"),
                ))
            }
            None => {
                return Err(SchemaError::at(
                    format!("initial_state.toggled[{i}]"),
                    format!("undefined object `{id}`"),
                ))
            }
        }
    }
    for (i, raw_rel) in state.relations.iter().enumerate() {
        let path = format!("initial_state.relations[{i}]");
        let p = predicate(raw_rel, &path, &world)?;
        let kind = match p.kind {
            PredicateKind::Inside => RelationKind::Inside,
            PredicateKind::Ontop => RelationKind::Ontop,
            PredicateKind::Nextto => RelationKind::Nextto,
            _ => {
                return Err(SchemaError::at(
                    format!("{path}.pred"),
                    "relations must be inside, ontop or nextto",
                ))
            }
        };
        if p.negated {
            return Err(SchemaError::at(format!("{path}.not"), "relations cannot be negated"));
        }
        initial.relate(kind, &p.subject, p.reference.as_deref().unwrap_or_default());
    }
    initial.check(&world).map_err(|m| SchemaError::at("initial_state", m))?;

    let predicates = raw
        .goal
        .iter()
        .enumerate()
        .map(|(i, g)| predicate(g, &format!("goal[{i}]"), &world))
        .collect::<Result<Vec<_>, _>>()?;

    if raw.allowed_actions.iter().any(|a| a.trim().is_empty()) {
        return Err(SchemaError::at("allowed_actions", "empty primitive name"));
    }

    Ok(TaskBundle {
        name: raw.name,
        difficulty: raw.difficulty,
        task_type: raw.task_type,
        instruction: raw.instruction,
        allowed_actions: raw.allowed_actions,
        workflow: raw.workflow,
        image: raw
            .image
            .map(|p| base.map(|b| b.join(&p)).unwrap_or_else(|| PathBuf::from(p))),
        world,
        initial,
        goal: GoalSpec::new(predicates),
    })
}

pub fn load_task(path: &Path) -> Result<TaskBundle, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::Io(path.to_path_buf(), e))?;
    parse_task(&text, path.parent()).map_err(|e| match e {
        SchemaError::Invalid { path: field, message } => SchemaError::Invalid {
            path: format!("{}: {}", path.display(), field),
            message,
        },
        other => other,
    })
}

/// Loads every `*.yaml` task in a directory, sorted by file name.
pub fn load_task_dir(dir: &Path) -> Result<Vec<(PathBuf, TaskBundle)>, SchemaError> {
    let entries = std::fs::read_dir(dir).map_err(|e| SchemaError::Io(dir.to_path_buf(), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "yaml" || x == "yml"))
        .collect();
    paths.sort();
    paths.into_iter().map(|p| load_task(&p).map(|t| (p, t))).collect()
}

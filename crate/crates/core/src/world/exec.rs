use serde::{Deserialize, Serialize};

use super::{apply_with_item, check_goals, GoalSpec, Predicate, PredicateKind, World, WorldError, WorldState};
use crate::bt::{self, BehaviorTree, ExecutionError, LeafCall, LeafKind, TickStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepOutcome {
    Success,
    Failure { reason: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub kind: LeafKind,
    pub action: String,
    pub obj: Option<String>,
    pub outcome: StepOutcome,
}

impl Step {
    pub fn failure_reason(&self) -> Option<&str> {
        match &self.outcome {
            StepOutcome::Failure { reason, .. } => Some(reason),
            StepOutcome::Success => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub steps: Vec<Step>,
    pub final_status: TickStatus,
    pub final_state: WorldState,
    pub goal_satisfied: bool,
}

impl ExecutionTrace {
    pub fn first_failure(&self) -> Option<(usize, &Step)> {
        self.steps
            .iter()
            .enumerate()
            .find(|(_, s)| s.failure_reason().is_some())
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error(transparent)]
    Execution(#[from] ExecutionError),
    #[error(transparent)]
    Goal(#[from] WorldError),
}

/// Condition ids understood by the symbolic world. `obj` is the subject and
/// `target` the reference object of binary predicates.
fn condition_predicate(call: &LeafCall<'_>) -> Result<Predicate, ExecutionError> {
    let leaf = call.leaf;
    let malformed = |reason: &str| ExecutionError::MalformedLeaf {
        id: leaf.id.clone(),
        reason: reason.to_string(),
    };
    let obj = leaf.obj().ok_or_else(|| malformed("missing `obj` attribute"))?;
    let target = || {
        leaf.attributes
            .get("target")
            .cloned()
            .ok_or_else(|| malformed("missing `target` attribute"))
    };
    Ok(match leaf.id.as_str() {
        "IS_OPEN" => Predicate::unary(PredicateKind::Open, obj),
        "IS_CLOSED" => Predicate::unary(PredicateKind::Open, obj).negate(),
        "IS_TOGGLED_ON" => Predicate::unary(PredicateKind::ToggledOn, obj),
        "IS_INSIDE" => Predicate::binary(PredicateKind::Inside, obj, target()?),
        "IS_ON_TOP" => Predicate::binary(PredicateKind::Ontop, obj, target()?),
        "IS_NEXT_TO" => Predicate::binary(PredicateKind::Nextto, obj, target()?),
        _ => return Err(malformed("unknown condition")),
    })
}

/// Ticks `tree` against a private copy of `initial`, applying each Action to
/// the symbolic state and evaluating Conditions against it.
///
/// Precondition failures, unknown objects and primitives are recorded as
/// failed steps; leaves that cannot be interpreted at all (no `obj`, unknown
/// condition id) abort with an error.
pub fn execute(
    tree: &BehaviorTree,
    initial: &WorldState,
    world: &World,
    goal: &GoalSpec,
) -> Result<ExecutionTrace, ExecError> {
    let mut state = initial.clone();
    let mut steps = Vec::new();
    let status = bt::tick(tree, |call| {
        let leaf = call.leaf;
        let fail = |reason: &str, detail: String| StepOutcome::Failure {
            reason: reason.to_string(),
            detail,
        };
        let outcome = match call.kind {
            LeafKind::Action => {
                let obj = leaf.obj().ok_or_else(|| ExecutionError::MalformedLeaf {
                    id: leaf.id.clone(),
                    reason: "missing `obj` attribute".to_string(),
                })?;
                let item = leaf.attributes.get("item").map(String::as_str);
                match apply_with_item(&state, &leaf.id, obj, item, world) {
                    Ok(next) => {
                        state = next;
                        StepOutcome::Success
                    }
                    Err(e) => fail(e.code(), e.to_string()),
                }
            }
            LeafKind::Condition => {
                let predicate = condition_predicate(&call)?;
                let missing = predicate.objects().find(|id| !world.contains(id)).map(String::from);
                match missing {
                    Some(id) => fail("UNKNOWN_OBJECT", format!("unknown object `{id}`")),
                    None if predicate.holds(&state) => StepOutcome::Success,
                    None => fail("CONDITION_FALSE", predicate.to_string()),
                }
            }
        };
        let status = match outcome {
            StepOutcome::Success => TickStatus::Success,
            StepOutcome::Failure { .. } => TickStatus::Failure,
        };
        steps.push(Step {
            kind: call.kind,
            action: leaf.id.clone(),
            obj: leaf.obj().map(String::from),
            outcome,
        });
        Ok(status)
    })?;
    let goal_satisfied = check_goals(&state, goal, world)?;
    Ok(ExecutionTrace {
        steps,
        final_status: status,
        final_state: state,
        goal_satisfied,
    })
}

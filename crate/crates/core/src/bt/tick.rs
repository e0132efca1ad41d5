use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use super::{BehaviorTree, BtNode, Leaf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeafKind {
    Action,
    Condition,
}

/// A leaf handed to the handler during a tick.
#[derive(Debug, Clone, Copy)]
pub struct LeafCall<'a> {
    pub kind: LeafKind,
    pub leaf: &'a Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceEvent {
    Leaf {
        kind: LeafKind,
        id: String,
        status: TickStatus,
    },
    /// A RetryUntilSuccessful node starting attempt `attempt` of `of`.
    Retry {
        attempt: u32,
        of: u32,
    },
    /// A Timeout node forwarded its child; symbolic time never expires it.
    Timeout {
        msec: u64,
    },
    SubTree {
        id: String,
    },
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ExecutionError {
    #[error("leaf handler panicked: {0}")]
    HandlerPanic(String),
    #[error("leaf `{0}` returned Running; the interpreter is synchronous")]
    RunningLeaf(String),
    #[error("SubTree references undefined tree `{0}`")]
    Reference(String),
    #[error("malformed leaf `{id}`: {reason}")]
    MalformedLeaf { id: String, reason: String },
}

/// Ticks the main tree to completion and returns its status.
pub fn tick<F>(tree: &BehaviorTree, handler: F) -> Result<TickStatus, ExecutionError>
where
    F: FnMut(LeafCall<'_>) -> Result<TickStatus, ExecutionError>,
{
    tick_traced(tree, handler).map(|(status, _)| status)
}

/// Like [`tick`], also returning the trace of leaf, retry, timeout and SubTree events.
pub fn tick_traced<F>(tree: &BehaviorTree, handler: F) -> Result<(TickStatus, Vec<TraceEvent>), ExecutionError>
where
    F: FnMut(LeafCall<'_>) -> Result<TickStatus, ExecutionError>,
{
    let mut ticker = Ticker {
        tree,
        handler,
        trace: Vec::new(),
    };
    let status = ticker.node(tree.root())?;
    Ok((status, ticker.trace))
}

struct Ticker<'t, F> {
    tree: &'t BehaviorTree,
    handler: F,
    trace: Vec<TraceEvent>,
}

impl<'t, F> Ticker<'t, F>
where
    F: FnMut(LeafCall<'_>) -> Result<TickStatus, ExecutionError>,
{
    fn node(&mut self, node: &'t BtNode) -> Result<TickStatus, ExecutionError> {
        match node {
            BtNode::Sequence { children, .. } => {
                for child in children {
                    if self.node(child)? == TickStatus::Failure {
                        return Ok(TickStatus::Failure);
                    }
                }
                Ok(TickStatus::Success)
            }
            BtNode::Fallback { children, .. } => {
                for child in children {
                    if self.node(child)? == TickStatus::Success {
                        return Ok(TickStatus::Success);
                    }
                }
                Ok(TickStatus::Failure)
            }
            BtNode::Action(leaf) => self.leaf(LeafKind::Action, leaf),
            BtNode::Condition(leaf) => self.leaf(LeafKind::Condition, leaf),
            BtNode::RetryUntilSuccessful {
                num_attempts, child, ..
            } => {
                for attempt in 1..=*num_attempts {
                    self.trace.push(TraceEvent::Retry {
                        attempt,
                        of: *num_attempts,
                    });
                    if self.node(child)? == TickStatus::Success {
                        return Ok(TickStatus::Success);
                    }
                }
                Ok(TickStatus::Failure)
            }
            BtNode::Timeout { msec, child, .. } => {
                self.trace.push(TraceEvent::Timeout { msec: *msec });
                self.node(child)
            }
            BtNode::SubTree { tree_id, .. } => {
                let root = self
                    .tree
                    .tree(tree_id)
                    .ok_or_else(|| ExecutionError::Reference(tree_id.clone()))?;
                self.trace.push(TraceEvent::SubTree { id: tree_id.clone() });
                self.node(root)
            }
        }
    }

    fn leaf(&mut self, kind: LeafKind, leaf: &'t Leaf) -> Result<TickStatus, ExecutionError> {
        let handler = &mut self.handler;
        let status = catch_unwind(AssertUnwindSafe(|| handler(LeafCall { kind, leaf }))).map_err(|payload| {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "non-string panic payload".to_string());
            ExecutionError::HandlerPanic(msg)
        })??;
        if status == TickStatus::Running {
            return Err(ExecutionError::RunningLeaf(leaf.id.clone()));
        }
        self.trace.push(TraceEvent::Leaf {
            kind,
            id: leaf.id.clone(),
            status,
        });
        Ok(status)
    }
}

//! Behavior tree data model for the BehaviorTree.CPP XML dialect.
//!
//! A [`BehaviorTree`] is a set of named trees plus the id of the one to run.
//! Nodes are immutable once the tree is built; [`BehaviorTree::new`] checks
//! the arity, attribute and reference invariants so every other module can
//! assume them.

mod tick;
mod xml;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use indexmap::IndexSet;

pub use tick::{tick, tick_traced, ExecutionError, LeafCall, LeafKind, TickStatus, TraceEvent};
pub use xml::{parse_xml, serialize};

/// Extra attributes carried by a node, kept verbatim through a round-trip.
pub type Attributes = BTreeMap<String, String>;

/// Name of the tree a single-root [`BehaviorTree`] is stored under.
pub const DEFAULT_TREE_ID: &str = "MainTree";

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum BtError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("unknown element <{0}>")]
    UnknownTag(String),
    #[error("<{tag}> is missing required attribute `{attribute}`")]
    MissingAttribute { tag: String, attribute: String },
    #[error("<{tag}> has invalid `{attribute}` value {value:?}")]
    InvalidAttribute {
        tag: String,
        attribute: String,
        value: String,
    },
    #[error("<{tag}> has {found} children, expected {expected}")]
    ChildArity {
        tag: String,
        expected: &'static str,
        found: usize,
    },
    #[error("unexpected text content inside <{0}>")]
    UnexpectedText(String),
    #[error("main tree is missing or undefined")]
    MissingMainTree,
    #[error("tree id `{0}` is defined more than once")]
    DuplicateTreeId(String),
    #[error("SubTree references undefined tree `{0}`")]
    UnresolvedSubTree(String),
    #[error("SubTree references form a cycle through `{0}`")]
    SubTreeCycle(String),
}

/// An Action or Condition leaf: a primitive id plus its attributes (`obj`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Leaf {
    pub id: String,
    pub attributes: Attributes,
}

impl Leaf {
    pub fn new(id: impl Into<String>) -> Self {
        Leaf {
            id: id.into(),
            attributes: Attributes::new(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    /// The `obj` attribute, which every symbolic primitive targets.
    pub fn obj(&self) -> Option<&str> {
        self.attributes.get("obj").map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BtNode {
    Sequence {
        children: Vec<BtNode>,
        attributes: Attributes,
    },
    Fallback {
        children: Vec<BtNode>,
        attributes: Attributes,
    },
    Action(Leaf),
    Condition(Leaf),
    RetryUntilSuccessful {
        num_attempts: u32,
        child: Box<BtNode>,
        attributes: Attributes,
    },
    Timeout {
        msec: u64,
        child: Box<BtNode>,
        attributes: Attributes,
    },
    SubTree {
        tree_id: String,
        attributes: Attributes,
    },
}

impl BtNode {
    pub fn sequence(children: Vec<BtNode>) -> Self {
        BtNode::Sequence {
            children,
            attributes: Attributes::new(),
        }
    }

    pub fn fallback(children: Vec<BtNode>) -> Self {
        BtNode::Fallback {
            children,
            attributes: Attributes::new(),
        }
    }

    /// `<Action ID=id obj=obj/>`
    pub fn action(id: impl Into<String>, obj: impl Into<String>) -> Self {
        BtNode::Action(Leaf::new(id).with_attr("obj", obj))
    }

    pub fn condition(id: impl Into<String>, obj: impl Into<String>) -> Self {
        BtNode::Condition(Leaf::new(id).with_attr("obj", obj))
    }

    pub fn retry(num_attempts: u32, child: BtNode) -> Self {
        BtNode::RetryUntilSuccessful {
            num_attempts,
            child: Box::new(child),
            attributes: Attributes::new(),
        }
    }

    pub fn timeout(msec: u64, child: BtNode) -> Self {
        BtNode::Timeout {
            msec,
            child: Box::new(child),
            attributes: Attributes::new(),
        }
    }

    pub fn subtree(tree_id: impl Into<String>) -> Self {
        BtNode::SubTree {
            tree_id: tree_id.into(),
            attributes: Attributes::new(),
        }
    }

    /// The XML element name of this node.
    pub fn tag(&self) -> &'static str {
        match self {
            BtNode::Sequence { .. } => "Sequence",
            BtNode::Fallback { .. } => "Fallback",
            BtNode::Action(_) => "Action",
            BtNode::Condition(_) => "Condition",
            BtNode::RetryUntilSuccessful { .. } => "RetryUntilSuccessful",
            BtNode::Timeout { .. } => "Timeout",
            BtNode::SubTree { .. } => "SubTree",
        }
    }

    pub fn children(&self) -> &[BtNode] {
        match self {
            BtNode::Sequence { children, .. } | BtNode::Fallback { children, .. } => children,
            BtNode::RetryUntilSuccessful { child, .. } | BtNode::Timeout { child, .. } => {
                std::slice::from_ref(child.as_ref())
            }
            BtNode::Action(_) | BtNode::Condition(_) | BtNode::SubTree { .. } => &[],
        }
    }

    pub fn children_mut(&mut self) -> &mut [BtNode] {
        match self {
            BtNode::Sequence { children, .. } | BtNode::Fallback { children, .. } => children,
            BtNode::RetryUntilSuccessful { child, .. } | BtNode::Timeout { child, .. } => {
                std::slice::from_mut(child.as_mut())
            }
            BtNode::Action(_) | BtNode::Condition(_) | BtNode::SubTree { .. } => &mut [],
        }
    }

    /// Pre-order walk over this node and its descendants (not following SubTrees).
    pub fn walk(&self) -> impl Iterator<Item = &BtNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children().iter().rev());
            Some(node)
        })
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        self.walk().count()
    }

    fn check(&self) -> Result<(), BtError> {
        let arity = |expected: &'static str, ok: bool, found: usize| {
            if ok {
                Ok(())
            } else {
                Err(BtError::ChildArity {
                    tag: self.tag().to_string(),
                    expected,
                    found,
                })
            }
        };
        match self {
            BtNode::Sequence { children, .. } | BtNode::Fallback { children, .. } => {
                arity("at least 1", !children.is_empty(), children.len())?;
            }
            BtNode::Action(leaf) | BtNode::Condition(leaf) => {
                if leaf.id.is_empty() {
                    return Err(BtError::MissingAttribute {
                        tag: self.tag().to_string(),
                        attribute: "ID".to_string(),
                    });
                }
            }
            BtNode::RetryUntilSuccessful { num_attempts, .. } => {
                if *num_attempts == 0 {
                    return Err(BtError::InvalidAttribute {
                        tag: self.tag().to_string(),
                        attribute: "num_attempts".to_string(),
                        value: "0".to_string(),
                    });
                }
            }
            BtNode::Timeout { .. } => {}
            BtNode::SubTree { tree_id, .. } => {
                if tree_id.is_empty() {
                    return Err(BtError::MissingAttribute {
                        tag: self.tag().to_string(),
                        attribute: "ID".to_string(),
                    });
                }
            }
        }
        self.children().iter().try_for_each(BtNode::check)
    }
}

/// The decorator/structure vocabulary used by structural matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StructTag {
    RetryUntilSuccessful,
    Fallback,
    Condition,
    Timeout,
    SubTree,
}

impl StructTag {
    pub const ALL: [StructTag; 5] = [
        StructTag::RetryUntilSuccessful,
        StructTag::Fallback,
        StructTag::Condition,
        StructTag::Timeout,
        StructTag::SubTree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StructTag::RetryUntilSuccessful => "RetryUntilSuccessful",
            StructTag::Fallback => "Fallback",
            StructTag::Condition => "Condition",
            StructTag::Timeout => "Timeout",
            StructTag::SubTree => "SubTree",
        }
    }

    fn of(node: &BtNode) -> Option<StructTag> {
        match node {
            BtNode::RetryUntilSuccessful { .. } => Some(StructTag::RetryUntilSuccessful),
            BtNode::Fallback { .. } => Some(StructTag::Fallback),
            BtNode::Condition(_) => Some(StructTag::Condition),
            BtNode::Timeout { .. } => Some(StructTag::Timeout),
            BtNode::SubTree { .. } => Some(StructTag::SubTree),
            BtNode::Sequence { .. } | BtNode::Action(_) => None,
        }
    }
}

impl fmt::Display for StructTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorTree {
    main_tree_id: String,
    trees: BTreeMap<String, BtNode>,
    root_attributes: Attributes,
}

impl BehaviorTree {
    /// Builds a tree document, checking node arity, main-tree presence and
    /// SubTree resolution (including cycles).
    pub fn new(main_tree_id: impl Into<String>, trees: BTreeMap<String, BtNode>) -> Result<Self, BtError> {
        let tree = BehaviorTree {
            main_tree_id: main_tree_id.into(),
            trees,
            root_attributes: Attributes::new(),
        };
        tree.check()?;
        Ok(tree)
    }

    /// A document holding one tree, `MainTree`.
    pub fn single(root: BtNode) -> Result<Self, BtError> {
        let mut trees = BTreeMap::new();
        trees.insert(DEFAULT_TREE_ID.to_string(), root);
        Self::new(DEFAULT_TREE_ID, trees)
    }

    /// Attributes on `<root>` other than `main_tree_to_execute` (e.g. `BTCPP_format`).
    pub fn with_root_attributes(mut self, attributes: Attributes) -> Self {
        self.root_attributes = attributes;
        self
    }

    pub fn root_attributes(&self) -> &Attributes {
        &self.root_attributes
    }

    pub fn main_tree_id(&self) -> &str {
        &self.main_tree_id
    }

    pub fn trees(&self) -> &BTreeMap<String, BtNode> {
        &self.trees
    }

    pub fn tree(&self, id: &str) -> Option<&BtNode> {
        self.trees.get(id)
    }

    pub fn root(&self) -> &BtNode {
        &self.trees[&self.main_tree_id]
    }

    /// Replaces the main tree's root node, re-checking invariants.
    pub fn with_root(&self, root: BtNode) -> Result<Self, BtError> {
        let mut trees = self.trees.clone();
        trees.insert(self.main_tree_id.clone(), root);
        Ok(BehaviorTree::new(self.main_tree_id.clone(), trees)?.with_root_attributes(self.root_attributes.clone()))
    }

    fn check(&self) -> Result<(), BtError> {
        if !self.trees.contains_key(&self.main_tree_id) {
            return Err(BtError::MissingMainTree);
        }
        for root in self.trees.values() {
            root.check()?;
            for node in root.walk() {
                if let BtNode::SubTree { tree_id, .. } = node {
                    if !self.trees.contains_key(tree_id) {
                        return Err(BtError::UnresolvedSubTree(tree_id.clone()));
                    }
                }
            }
        }
        // DFS colouring over the tree-reference graph.
        let mut done = HashSet::new();
        for id in self.trees.keys() {
            let mut path = Vec::new();
            self.check_cycles(id, &mut path, &mut done)?;
        }
        Ok(())
    }

    fn check_cycles<'a>(
        &'a self,
        id: &'a str,
        path: &mut Vec<&'a str>,
        done: &mut HashSet<&'a str>,
    ) -> Result<(), BtError> {
        if done.contains(id) {
            return Ok(());
        }
        if path.contains(&id) {
            return Err(BtError::SubTreeCycle(id.to_string()));
        }
        path.push(id);
        for node in self.trees[id].walk() {
            if let BtNode::SubTree { tree_id, .. } = node {
                self.check_cycles(tree_id, path, done)?;
            }
        }
        path.pop();
        done.insert(id);
        Ok(())
    }

    /// Pre-order walk from the main tree, descending into referenced SubTrees.
    pub fn reachable_nodes(&self) -> Vec<&BtNode> {
        let mut out = Vec::new();
        self.collect_reachable(self.root(), &mut out);
        out
    }

    fn collect_reachable<'a>(&'a self, node: &'a BtNode, out: &mut Vec<&'a BtNode>) {
        out.push(node);
        if let BtNode::SubTree { tree_id, .. } = node {
            self.collect_reachable(&self.trees[tree_id], out);
        }
        for child in node.children() {
            self.collect_reachable(child, out);
        }
    }

    /// Distinct Action ids in first-appearance order.
    pub fn actions_in_order(&self) -> Vec<String> {
        let ids: IndexSet<&str> = self
            .reachable_nodes()
            .into_iter()
            .filter_map(|n| match n {
                BtNode::Action(leaf) => Some(leaf.id.as_str()),
                _ => None,
            })
            .collect();
        ids.into_iter().map(str::to_string).collect()
    }

    /// Number of Action nodes (with multiplicity).
    pub fn action_count(&self) -> usize {
        self.reachable_nodes()
            .into_iter()
            .filter(|n| matches!(n, BtNode::Action(_)))
            .count()
    }
}

/// Distinct Action primitive ids; control, decorator and Condition nodes are excluded.
pub fn extract_action_set(tree: &BehaviorTree) -> BTreeSet<String> {
    tree.actions_in_order().into_iter().collect()
}

/// The subset of the structural vocabulary that occurs in the tree.
pub fn extract_decorator_set(tree: &BehaviorTree) -> BTreeSet<StructTag> {
    tree.reachable_nodes().into_iter().filter_map(StructTag::of).collect()
}

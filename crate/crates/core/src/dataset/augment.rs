//! Structural and lexical augmentation of episode records.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::{IndexMap, IndexSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_allowed_actions, EpisodeRecord};
use crate::bt::{extract_decorator_set, parse_xml, serialize, BehaviorTree, BtError, BtNode, StructTag};
use crate::conformance::PrimitiveLibrary;
use crate::world::Primitive;

const BUILTIN_SYNONYMS: &str = include_str!("../../data/synonyms.txt");

/// Retry and timeout parameters the random chooser draws from.
pub const RETRY_CHOICES: [u32; 4] = [2, 3, 4, 5];
pub const TIMEOUT_CHOICES: [u64; 4] = [1000, 2000, 5000, 10000];

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("record tree does not parse: {0}")]
    Parse(#[from] BtError),
    #[error("action index {index} out of range ({count} actions in the main tree)")]
    BadTarget { index: usize, count: usize },
    #[error("target action {0} has no obj attribute")]
    TargetWithoutObject(String),
    #[error("unknown construct `{0}`")]
    UnknownConstruct(String),
    #[error("tree already contains {0}")]
    ConstructPresent(StructTag),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("{0} has no preceding grasp to take its item from")]
    NoPriorGrasp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construct {
    Retry(u32),
    Timeout(u64),
    Fallback,
}

impl Construct {
    pub fn tag(self) -> StructTag {
        match self {
            Construct::Retry(_) => StructTag::RetryUntilSuccessful,
            Construct::Timeout(_) => StructTag::Timeout,
            Construct::Fallback => StructTag::Fallback,
        }
    }

    /// Uniform draw over the three constructs and their parameter choices.
    pub fn random(rng: &mut impl Rng) -> Self {
        match rng.gen_range(0..3) {
            0 => Construct::Retry(RETRY_CHOICES[rng.gen_range(0..RETRY_CHOICES.len())]),
            1 => Construct::Timeout(TIMEOUT_CHOICES[rng.gen_range(0..TIMEOUT_CHOICES.len())]),
            _ => Construct::Fallback,
        }
    }
}

impl FromStr for Construct {
    type Err = AugmentError;

    /// Accepts `retry(N)`, `timeout(MS)` and `fallback`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || AugmentError::UnknownConstruct(s.to_string());
        let s = s.trim();
        if s == "fallback" {
            return Ok(Construct::Fallback);
        }
        let (name, rest) = s.split_once('(').ok_or_else(unknown)?;
        let arg = rest.strip_suffix(')').ok_or_else(unknown)?.trim();
        match name.trim() {
            "retry" => match arg.parse() {
                Ok(n) if n >= 1 => Ok(Construct::Retry(n)),
                _ => Err(unknown()),
            },
            "timeout" => arg.parse().map(Construct::Timeout).map_err(|_| unknown()),
            _ => Err(unknown()),
        }
    }
}

impl fmt::Display for Construct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construct::Retry(n) => write!(f, "retry({n})"),
            Construct::Timeout(ms) => write!(f, "timeout({ms})"),
            Construct::Fallback => f.write_str("fallback"),
        }
    }
}

fn instruction_clause(construct: Construct, id: &str, obj: &str) -> String {
    match construct {
        Construct::Retry(n) => format!("If {id} {obj} fails, retry it up to {n} times."),
        Construct::Timeout(ms) => format!("Give {id} {obj} at most {ms} ms to finish."),
        Construct::Fallback => format!("If {id} {obj} fails, navigate to {obj} and try {id} again."),
    }
}

fn append_clause(instruction: &str, clause: &str) -> String {
    let base = instruction.trim_end();
    if base.is_empty() {
        clause.to_string()
    } else if base.ends_with(['.', '!', '?']) {
        format!("{base} {clause}")
    } else {
        format!("{base}. {clause}")
    }
}

fn wrap(construct: Construct, action: BtNode) -> Result<BtNode, AugmentError> {
    Ok(match construct {
        Construct::Retry(n) => BtNode::retry(n, action),
        Construct::Timeout(ms) => BtNode::timeout(ms, action),
        Construct::Fallback => {
            let BtNode::Action(leaf) = &action else {
                unreachable!("only actions are wrapped")
            };
            let obj = leaf
                .obj()
                .ok_or_else(|| AugmentError::TargetWithoutObject(leaf.id.clone()))?
                .to_string();
            let recovery = BtNode::sequence(vec![BtNode::action("NAVIGATE_TO", obj), action.clone()]);
            BtNode::fallback(vec![action, recovery])
        }
    })
}

/// Replaces the `target`-th Action of the pre-order walk and returns its id and obj.
fn wrap_nth(
    node: &mut BtNode,
    target: usize,
    seen: &mut usize,
    construct: Construct,
) -> Result<Option<(String, String)>, AugmentError> {
    if let BtNode::Action(leaf) = node {
        *seen += 1;
        if *seen - 1 == target {
            let found = (leaf.id.clone(), leaf.obj().unwrap_or_default().to_string());
            *node = wrap(construct, node.clone())?;
            return Ok(Some(found));
        }
        return Ok(None);
    }
    for child in node.children_mut() {
        if let Some(found) = wrap_nth(child, target, seen, construct)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

/// Number of Action nodes in the main tree.
pub fn main_action_count(tree: &BehaviorTree) -> usize {
    tree.root().walk().filter(|n| matches!(n, BtNode::Action(_))).count()
}

/// Wraps the `target`-th Action (main-tree pre-order, from 0) in `construct`.
///
/// The fallback construct yields `Fallback[action, Sequence[NAVIGATE_TO obj, action]]`.
/// The instruction gains a fixed clause naming the construct, `allowed_actions`
/// is re-derived and the record id gets a `__struct` suffix.
pub fn structural_augment(
    record: &EpisodeRecord,
    construct: Construct,
    target: usize,
) -> Result<EpisodeRecord, AugmentError> {
    let tree = parse_xml(&record.bt_xml)?;
    if extract_decorator_set(&tree).contains(&construct.tag()) {
        return Err(AugmentError::ConstructPresent(construct.tag()));
    }
    let mut root = tree.root().clone();
    let mut seen = 0;
    let (id, obj) = wrap_nth(&mut root, target, &mut seen, construct)?.ok_or(AugmentError::BadTarget {
        index: target,
        count: main_action_count(&tree),
    })?;
    let bt_xml = serialize(&tree.with_root(root)?);
    let mut out = record.clone();
    out.id = format!("{}__struct", record.id);
    out.instruction = append_clause(&record.instruction, &instruction_clause(construct, &id, &obj));
    out.allowed_actions = derive_allowed_actions(&bt_xml)?;
    out.bt_xml = bt_xml;
    out.provenance.structurally_augmented = true;
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum SynonymError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("synonym {0} is not in the primitive library")]
    NotInLibrary(String),
    #[error("{0} appears in more than one synonym group")]
    Duplicate(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
}

/// Groups of interchangeable primitive names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymMap {
    groups: IndexMap<String, Vec<String>>,
}

impl SynonymMap {
    /// `GRASP`, `GRAB` and `PICK` as one group.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_SYNONYMS, &PrimitiveLibrary::builtin()).expect("bundled synonyms are valid")
    }

    /// One whitespace-separated group per line; `#` starts a comment.
    pub fn parse(text: &str, library: &PrimitiveLibrary) -> Result<Self, SynonymError> {
        let mut groups = IndexMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let names: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if names.len() < 2 {
                return Err(SynonymError::Syntax {
                    line: i + 1,
                    message: "a group needs at least two names".into(),
                });
            }
            for name in &names {
                if !library.contains(name) {
                    return Err(SynonymError::NotInLibrary(name.clone()));
                }
                let others: Vec<String> = names.iter().filter(|n| *n != name).cloned().collect();
                if groups.insert(name.clone(), others).is_some() {
                    return Err(SynonymError::Duplicate(name.clone()));
                }
            }
        }
        Ok(SynonymMap { groups })
    }

    pub fn load(path: &Path, library: &PrimitiveLibrary) -> Result<Self, SynonymError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynonymError::Io(path.display().to_string(), e))?;
        Self::parse(&text, library)
    }

    pub fn synonyms(&self, name: &str) -> &[String] {
        self.groups.get(name).map_or(&[], Vec::as_slice)
    }
}

fn is_grasp(id: &str) -> bool {
    Primitive::from_name(id) == Some(Primitive::Grasp)
}

fn is_placement(id: &str) -> bool {
    Primitive::from_name(id).is_some_and(Primitive::is_placement)
}

fn ordered_trees(tree: &BehaviorTree) -> Vec<&str> {
    let main = tree.main_tree_id();
    std::iter::once(main)
        .chain(tree.trees().keys().map(String::as_str).filter(|k| *k != main))
        .collect()
}

fn add_items(
    node: &mut BtNode,
    chosen: &IndexSet<String>,
    last_grasp: &mut Option<String>,
) -> Result<bool, AugmentError> {
    let mut changed = false;
    if let BtNode::Action(leaf) = node {
        if is_grasp(&leaf.id) {
            *last_grasp = leaf.obj().map(str::to_string);
        } else if chosen.contains(&leaf.id) && !leaf.attributes.contains_key("item") {
            let item = last_grasp
                .clone()
                .ok_or_else(|| AugmentError::NoPriorGrasp(leaf.id.clone()))?;
            leaf.attributes.insert("item".into(), item);
            changed = true;
        }
    }
    for child in node.children_mut() {
        changed |= add_items(child, chosen, last_grasp)?;
    }
    Ok(changed)
}

fn rename(node: &mut BtNode, renames: &HashMap<String, String>) {
    if let BtNode::Action(leaf) = node {
        if let Some(new) = renames.get(&leaf.id) {
            leaf.id = new.clone();
        }
    }
    for child in node.children_mut() {
        rename(child, renames);
    }
}

/// Lexical augmentation with one Bernoulli(`probability`) draw per eligible
/// primitive, in first-appearance order:
///
/// 1. each distinct placement primitive may gain an explicit `item` attribute
///    naming the object of the most recent grasp before it in tree order;
/// 2. each distinct primitive with synonyms may be renamed everywhere to a
///    synonym picked uniformly.
///
/// XML and `allowed_actions` change together. When nothing is drawn the
/// record is returned unchanged.
pub fn lexical_augment(
    record: &EpisodeRecord,
    probability: f64,
    seed: u64,
    synonyms: &SynonymMap,
) -> Result<EpisodeRecord, AugmentError> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(AugmentError::BadProbability(probability));
    }
    if probability == 0.0 {
        return Ok(record.clone());
    }
    let tree = parse_xml(&record.bt_xml)?;
    let order = ordered_trees(&tree);
    let distinct: IndexSet<String> = order
        .iter()
        .flat_map(|id| tree.trees()[*id].walk())
        .filter_map(|n| match n {
            BtNode::Action(leaf) => Some(leaf.id.clone()),
            _ => None,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let explicit: IndexSet<String> = distinct
        .iter()
        .filter(|id| is_placement(id))
        .filter(|_| rng.gen_bool(probability))
        .cloned()
        .collect();
    let mut renames = HashMap::new();
    for id in &distinct {
        let options = synonyms.synonyms(id);
        if !options.is_empty() && rng.gen_bool(probability) {
            renames.insert(id.clone(), options[rng.gen_range(0..options.len())].clone());
        }
    }

    let mut trees: BTreeMap<String, BtNode> = tree.trees().clone();
    let mut changed = !renames.is_empty();
    for id in &order {
        let root = trees.get_mut(*id).expect("ordered ids come from the map");
        let mut last_grasp = None;
        changed |= add_items(root, &explicit, &mut last_grasp)?;
        rename(root, &renames);
    }
    if !changed {
        return Ok(record.clone());
    }
    let augmented = BehaviorTree::new(tree.main_tree_id(), trees)?.with_root_attributes(tree.root_attributes().clone());
    let mut out = record.clone();
    out.bt_xml = serialize(&augmented);
    out.allowed_actions = record
        .allowed_actions
        .iter()
        .map(|a| renames.get(a).unwrap_or(a).clone())
        .collect::<IndexSet<_>>()
        .into_iter()
        .collect();
    out.provenance.lexically_augmented = true;
    Ok(out)
}

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use btforge::bt::{BehaviorTree, BtNode, Leaf};
use rand::seq::SliceRandom;
use rand::Rng;

pub const ACTION_IDS: [&str; 8] = [
    "NAVIGATE_TO",
    "GRASP",
    "GRAB",
    "PICK",
    "PLACE_ON_TOP",
    "PLACE_INSIDE",
    "OPEN",
    "TOGGLE_ON",
];
pub const CONDITION_IDS: [&str; 3] = ["IS_OPEN", "IS_TOGGLED_ON", "IS_INSIDE"];
pub const OBJECTS: [&str; 5] = ["teapot", "table", "fridge", "salt & pepper", "\"quoted\" <box>"];
pub const HELPER: &str = "Helper";

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn leaf<R: Rng>(rng: &mut R, ids: &[&str]) -> Leaf {
    let mut leaf = Leaf::new(*ids.choose(rng).unwrap()).with_attr("obj", *OBJECTS.choose(rng).unwrap());
    if rng.gen_bool(0.2) {
        leaf = leaf.with_attr("name", format!("n{}", rng.gen_range(0..100)));
    }
    leaf
}

/// A random node using at most `*budget` nodes (at least one).
pub fn random_node<R: Rng>(rng: &mut R, budget: &mut usize, subtree: bool) -> BtNode {
    *budget -= 1;
    let choice = if *budget == 0 {
        rng.gen_range(0..3)
    } else {
        rng.gen_range(0..7)
    };
    match choice {
        0 | 1 => BtNode::Action(leaf(rng, &ACTION_IDS)),
        2 if subtree && rng.gen_bool(0.3) => BtNode::subtree(HELPER),
        2 => BtNode::Condition(leaf(rng, &CONDITION_IDS)),
        3 | 4 => {
            let n = rng.gen_range(1..=3);
            let mut children = Vec::new();
            for _ in 0..n {
                if *budget == 0 {
                    break;
                }
                children.push(random_node(rng, budget, subtree));
            }
            if children.is_empty() {
                children.push(BtNode::Action(leaf(rng, &ACTION_IDS)));
            }
            if choice == 3 {
                BtNode::sequence(children)
            } else {
                BtNode::fallback(children)
            }
        }
        5 => BtNode::retry(rng.gen_range(1..6), random_node(rng, budget, subtree)),
        _ => BtNode::timeout(rng.gen_range(0..20_000), random_node(rng, budget, subtree)),
    }
}

/// A random tree document with at most `max_nodes` nodes over all trees.
/// Some documents carry a second tree referenced through SubTree.
pub fn random_doc<R: Rng>(rng: &mut R, max_nodes: usize) -> BehaviorTree {
    let with_helper = max_nodes >= 3 && rng.gen_bool(0.3);
    let mut budget = max_nodes;
    let mut trees = BTreeMap::new();
    if with_helper {
        let mut helper_budget = rng.gen_range(1..=max_nodes / 2);
        budget -= helper_budget;
        trees.insert(HELPER.to_string(), random_node(rng, &mut helper_budget, false));
    }
    trees.insert("MainTree".to_string(), random_node(rng, &mut budget, with_helper));
    BehaviorTree::new("MainTree", trees).expect("generated trees are well formed")
}

fn reachable_elements<'a, 'i>(doc: &'a roxmltree::Document<'i>) -> Vec<roxmltree::Node<'a, 'i>> {
    let root = doc.root_element();
    let trees: HashMap<&str, roxmltree::Node> = root
        .children()
        .filter(|n| n.has_tag_name("BehaviorTree"))
        .map(|n| (n.attribute("ID").unwrap(), n))
        .collect();
    let main = root
        .attribute("main_tree_to_execute")
        .unwrap_or_else(|| trees.keys().next().unwrap());
    let mut out = Vec::new();
    let mut stack = vec![trees[main]];
    while let Some(node) = stack.pop() {
        for el in node.descendants().filter(|n| n.is_element() && *n != node) {
            if el.has_tag_name("SubTree") {
                stack.push(trees[el.attribute("ID").unwrap()]);
            }
            out.push(el);
        }
    }
    out
}

/// Structural tags present in a serialized document, by direct XML walk.
pub fn naive_tags(xml: &str) -> BTreeSet<String> {
    let doc = roxmltree::Document::parse(xml).unwrap();
    let wanted = ["RetryUntilSuccessful", "Fallback", "Condition", "Timeout", "SubTree"];
    reachable_elements(&doc)
        .into_iter()
        .map(|n| n.tag_name().name().to_string())
        .filter(|t| wanted.contains(&t.as_str()))
        .collect()
}

/// Action ids present in a serialized document, by direct XML walk.
pub fn naive_actions(xml: &str) -> BTreeSet<String> {
    let doc = roxmltree::Document::parse(xml).unwrap();
    reachable_elements(&doc)
        .into_iter()
        .filter(|n| n.has_tag_name("Action"))
        .map(|n| n.attribute("ID").unwrap().to_string())
        .collect()
}

pub fn naive_struct_match(a: &str, b: &str) -> u8 {
    u8::from(naive_tags(a) == naive_tags(b))
}

pub fn naive_jaccard(a: &str, b: &str) -> f64 {
    let (x, y) = (naive_actions(a), naive_actions(b));
    let union = x.union(&y).count();
    if union == 0 {
        1.0
    } else {
        x.intersection(&y).count() as f64 / union as f64
    }
}

/// Brute-force optimal k-center radius: minimum over all k-subsets of the
/// largest point-to-nearest-center distance.
pub fn brute_force_radius(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let centers: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let radius = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|&c| dist(p, &points[c]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        best = best.min(radius);
    }
    best
}

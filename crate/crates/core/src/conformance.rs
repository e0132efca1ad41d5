//! Conformance checking: is a candidate output a deployable behavior tree
//! that only uses primitives from the library (and, optionally, from an
//! allowed subset)?

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bt::{self, BehaviorTree, BtNode};

const DEFAULT_LIBRARY: &str = include_str!("../data/library.txt");

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("primitive `{0}` is listed more than once")]
    Duplicate(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConformanceError {
    #[error("no outputs to rate")]
    EmptyInput,
}

/// The fixed set of primitives a plan may invoke, each with the attributes
/// its Action nodes must carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimitiveLibrary {
    entries: IndexMap<String, Vec<String>>,
}

impl PrimitiveLibrary {
    /// The bundled 22-entry library.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LIBRARY).expect("bundled library is well-formed")
    }

    /// Parses the line format `NAME [attr[,attr...]]`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, LibraryError> {
        let mut entries = IndexMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let name = fields.next().unwrap_or_default();
            if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(LibraryError::Syntax {
                    line: idx + 1,
                    message: format!("invalid primitive name `{name}`"),
                });
            }
            let attrs: Vec<String> = match fields.next() {
                Some(list) => list
                    .split(',')
                    .map(str::trim)
                    .filter(|a| !a.is_empty())
                    .map(String::from)
                    .collect(),
                None => Vec::new(),
            };
            if let Some(extra) = fields.next() {
                return Err(LibraryError::Syntax {
                    line: idx + 1,
                    message: format!("unexpected token `{extra}`"),
                });
            }
            if entries.insert(name.to_string(), attrs).is_some() {
                return Err(LibraryError::Duplicate(name.to_string()));
            }
        }
        Ok(PrimitiveLibrary { entries })
    }

    pub fn load(path: &Path) -> Result<Self, LibraryError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Builds a library whose primitives take a single `obj` attribute.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PrimitiveLibrary {
            entries: names.into_iter().map(|n| (n.into(), vec!["obj".to_string()])).collect(),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn required_attributes(&self, name: &str) -> &[String] {
        self.entries.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl fmt::Display for PrimitiveLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, attrs) in &self.entries {
            if attrs.is_empty() {
                writeln!(f, "{name}")?;
            } else {
                writeln!(f, "{name} {}", attrs.join(","))?;
            }
        }
        Ok(())
    }
}

/// An Action node that lacks an attribute its primitive requires.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArityViolation {
    pub action: String,
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub xml_valid: bool,
    pub btcpp_valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub unknown_actions: Vec<String>,
    pub disallowed_actions: Vec<String>,
    pub missing_attributes: Vec<ArityViolation>,
    pub verdict: bool,
}

/// Cuts the XML document out of a raw model response: the body of an
/// ```` ```xml ```` fence when present, else the span from the first `<` to
/// the last `>`. Text without any tag is returned trimmed.
pub fn extract_xml_block(text: &str) -> &str {
    if let Some(start) = text.find("```xml") {
        let body = &text[start + 6..];
        let end = body.find("```").unwrap_or(body.len());
        return body[..end].trim();
    }
    match (text.find('<'), text.rfind('>')) {
        (Some(a), Some(b)) if a < b => &text[a..=b],
        _ => text.trim(),
    }
}

/// Validates a candidate output against the library and an optional allowed set.
pub fn validate(text: &str, library: &PrimitiveLibrary, allowed: Option<&BTreeSet<String>>) -> ValidationReport {
    let block = extract_xml_block(text);
    let xml_valid = roxmltree::Document::parse(block).is_ok();
    let mut report = ValidationReport {
        xml_valid,
        btcpp_valid: false,
        error: None,
        unknown_actions: Vec::new(),
        disallowed_actions: Vec::new(),
        missing_attributes: Vec::new(),
        verdict: false,
    };
    match bt::parse_xml(block) {
        Ok(tree) => {
            report.btcpp_valid = true;
            check_tree(&tree, library, allowed, &mut report);
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Validates an already-parsed tree.
pub fn validate_tree(
    tree: &BehaviorTree,
    library: &PrimitiveLibrary,
    allowed: Option<&BTreeSet<String>>,
) -> ValidationReport {
    let mut report = ValidationReport {
        xml_valid: true,
        btcpp_valid: true,
        error: None,
        unknown_actions: Vec::new(),
        disallowed_actions: Vec::new(),
        missing_attributes: Vec::new(),
        verdict: false,
    };
    check_tree(tree, library, allowed, &mut report);
    report
}

fn check_tree(
    tree: &BehaviorTree,
    library: &PrimitiveLibrary,
    allowed: Option<&BTreeSet<String>>,
    report: &mut ValidationReport,
) {
    let actions = bt::extract_action_set(tree);
    report.unknown_actions = actions.iter().filter(|a| !library.contains(a)).cloned().collect();
    if let Some(allowed) = allowed {
        report.disallowed_actions = actions.difference(allowed).cloned().collect();
    }
    let mut missing = BTreeSet::new();
    for node in tree.reachable_nodes() {
        if let BtNode::Action(leaf) = node {
            for attr in library.required_attributes(&leaf.id) {
                if !leaf.attributes.get(attr).is_some_and(|v| !v.is_empty()) {
                    missing.insert(ArityViolation {
                        action: leaf.id.clone(),
                        attribute: attr.clone(),
                    });
                }
            }
        }
    }
    report.missing_attributes = missing.into_iter().collect();
    report.verdict = report.btcpp_valid
        && report.unknown_actions.is_empty()
        && report.disallowed_actions.is_empty()
        && report.missing_attributes.is_empty();
}

/// Fractions of outputs that are well-formed XML and valid dialect trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityRates {
    pub xml_rate: f64,
    pub btcpp_rate: f64,
}

pub fn validity_rates<S: AsRef<str>>(
    texts: &[S],
    library: &PrimitiveLibrary,
) -> Result<ValidityRates, ConformanceError> {
    if texts.is_empty() {
        return Err(ConformanceError::EmptyInput);
    }
    let (mut xml, mut btcpp) = (0usize, 0usize);
    for text in texts {
        let r = validate(text.as_ref(), library, None);
        xml += r.xml_valid as usize;
        btcpp += r.btcpp_valid as usize;
    }
    let n = texts.len() as f64;
    Ok(ValidityRates {
        xml_rate: xml as f64 / n,
        btcpp_rate: btcpp as f64 / n,
    })
}

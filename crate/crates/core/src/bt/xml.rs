use std::collections::BTreeMap;
use std::fmt::Write as _;

use roxmltree::{Document, Node, NodeType};

use super::{Attributes, BehaviorTree, BtError, BtNode, Leaf};

/// Parses a BehaviorTree.CPP XML document.
///
/// Comments, processing instructions and whitespace are ignored; any other
/// text content or element outside the node vocabulary is an error. When
/// `main_tree_to_execute` is absent, a document with exactly one
/// `<BehaviorTree>` uses that tree.
pub fn parse_xml(text: &str) -> Result<BehaviorTree, BtError> {
    let doc = Document::parse(text).map_err(|e| BtError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "root" {
        return Err(BtError::UnknownTag(root.tag_name().name().to_string()));
    }

    let mut root_attributes = Attributes::new();
    let mut main = None;
    for attr in root.attributes() {
        if attr.name() == "main_tree_to_execute" {
            main = Some(attr.value().to_string());
        } else {
            root_attributes.insert(attr.name().to_string(), attr.value().to_string());
        }
    }

    let mut trees = BTreeMap::new();
    for child in element_children(root)? {
        let name = child.tag_name().name();
        if name != "BehaviorTree" {
            return Err(BtError::UnknownTag(name.to_string()));
        }
        let id = required(child, "ID")?;
        let body = element_children(child)?;
        if body.len() != 1 {
            return Err(BtError::ChildArity {
                tag: "BehaviorTree".to_string(),
                expected: "exactly 1",
                found: body.len(),
            });
        }
        let node = parse_node(body[0])?;
        if trees.insert(id.to_string(), node).is_some() {
            return Err(BtError::DuplicateTreeId(id.to_string()));
        }
    }

    let main = match main {
        Some(id) => id,
        None if trees.len() == 1 => trees.keys().next().cloned().unwrap_or_default(),
        None => return Err(BtError::MissingMainTree),
    };
    Ok(BehaviorTree::new(main, trees)?.with_root_attributes(root_attributes))
}

fn element_children<'a, 'i>(node: Node<'a, 'i>) -> Result<Vec<Node<'a, 'i>>, BtError> {
    let mut out = Vec::new();
    for child in node.children() {
        match child.node_type() {
            NodeType::Element => out.push(child),
            NodeType::Text if !child.text().unwrap_or("").trim().is_empty() => {
                return Err(BtError::UnexpectedText(node.tag_name().name().to_string()));
            }
            _ => {}
        }
    }
    Ok(out)
}

fn required<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, BtError> {
    match node.attribute(attr) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(BtError::MissingAttribute {
            tag: node.tag_name().name().to_string(),
            attribute: attr.to_string(),
        }),
    }
}

fn attributes_except(node: Node<'_, '_>, skip: &str) -> Attributes {
    node.attributes()
        .filter(|a| a.name() != skip)
        .map(|a| (a.name().to_string(), a.value().to_string()))
        .collect()
}

fn parse_number<T: std::str::FromStr>(node: Node<'_, '_>, attr: &str) -> Result<T, BtError> {
    let raw = required(node, attr)?;
    raw.trim().parse().map_err(|_| BtError::InvalidAttribute {
        tag: node.tag_name().name().to_string(),
        attribute: attr.to_string(),
        value: raw.to_string(),
    })
}

fn single_child(node: Node<'_, '_>) -> Result<BtNode, BtError> {
    let children = element_children(node)?;
    if children.len() != 1 {
        return Err(BtError::ChildArity {
            tag: node.tag_name().name().to_string(),
            expected: "exactly 1",
            found: children.len(),
        });
    }
    parse_node(children[0])
}

fn leaf(node: Node<'_, '_>) -> Result<Leaf, BtError> {
    let children = element_children(node)?;
    if !children.is_empty() {
        return Err(BtError::ChildArity {
            tag: node.tag_name().name().to_string(),
            expected: "0",
            found: children.len(),
        });
    }
    Ok(Leaf {
        id: required(node, "ID")?.to_string(),
        attributes: attributes_except(node, "ID"),
    })
}

fn parse_node(node: Node<'_, '_>) -> Result<BtNode, BtError> {
    let tag = node.tag_name().name();
    let parsed = match tag {
        "Sequence" | "Fallback" => {
            let children = element_children(node)?
                .into_iter()
                .map(parse_node)
                .collect::<Result<Vec<_>, _>>()?;
            let attributes = attributes_except(node, "");
            if tag == "Sequence" {
                BtNode::Sequence { children, attributes }
            } else {
                BtNode::Fallback { children, attributes }
            }
        }
        "Action" => BtNode::Action(leaf(node)?),
        "Condition" => BtNode::Condition(leaf(node)?),
        "RetryUntilSuccessful" => BtNode::RetryUntilSuccessful {
            num_attempts: parse_number(node, "num_attempts")?,
            child: Box::new(single_child(node)?),
            attributes: attributes_except(node, "num_attempts"),
        },
        "Timeout" => BtNode::Timeout {
            msec: parse_number(node, "msec")?,
            child: Box::new(single_child(node)?),
            attributes: attributes_except(node, "msec"),
        },
        "SubTree" => {
            let children = element_children(node)?;
            if !children.is_empty() {
                return Err(BtError::ChildArity {
                    tag: tag.to_string(),
                    expected: "0",
                    found: children.len(),
                });
            }
            BtNode::SubTree {
                tree_id: required(node, "ID")?.to_string(),
                attributes: attributes_except(node, "ID"),
            }
        }
        other => return Err(BtError::UnknownTag(other.to_string())),
    };
    parsed.check_shallow()?;
    Ok(parsed)
}

impl BtNode {
    fn check_shallow(&self) -> Result<(), BtError> {
        match self {
            BtNode::Sequence { children, .. } | BtNode::Fallback { children, .. } if children.is_empty() => {
                Err(BtError::ChildArity {
                    tag: self.tag().to_string(),
                    expected: "at least 1",
                    found: 0,
                })
            }
            BtNode::RetryUntilSuccessful { num_attempts: 0, .. } => Err(BtError::InvalidAttribute {
                tag: self.tag().to_string(),
                attribute: "num_attempts".to_string(),
                value: "0".to_string(),
            }),
            _ => Ok(()),
        }
    }
}

/// Canonical serialization: XML declaration, 2-space indent, `ID` first then
/// the remaining attributes alphabetically, double-quoted values, trailing
/// newline. The main tree is written first, other trees follow by id.
pub fn serialize(tree: &BehaviorTree) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<root");
    push_attr(&mut out, "main_tree_to_execute", tree.main_tree_id());
    for (k, v) in tree.root_attributes() {
        push_attr(&mut out, k, v);
    }
    out.push_str(">\n");

    let main = tree.main_tree_id();
    let order = std::iter::once(main).chain(tree.trees().keys().map(String::as_str).filter(|id| *id != main));
    for id in order {
        out.push_str("  <BehaviorTree");
        push_attr(&mut out, "ID", id);
        out.push_str(">\n");
        write_node(&mut out, &tree.trees()[id], 2);
        out.push_str("  </BehaviorTree>\n");
    }
    out.push_str("</root>\n");
    out
}

fn write_node(out: &mut String, node: &BtNode, depth: usize) {
    let indent = "  ".repeat(depth);
    let _ = write!(out, "{indent}<{}", node.tag());
    match node {
        BtNode::Sequence { attributes, .. } | BtNode::Fallback { attributes, .. } => {
            push_attrs(out, attributes);
        }
        BtNode::Action(leaf) | BtNode::Condition(leaf) => {
            push_attr(out, "ID", &leaf.id);
            push_attrs(out, &leaf.attributes);
        }
        BtNode::RetryUntilSuccessful {
            num_attempts,
            attributes,
            ..
        } => {
            let mut attrs = attributes.clone();
            attrs.insert("num_attempts".into(), num_attempts.to_string());
            push_attrs(out, &attrs);
        }
        BtNode::Timeout { msec, attributes, .. } => {
            let mut attrs = attributes.clone();
            attrs.insert("msec".into(), msec.to_string());
            push_attrs(out, &attrs);
        }
        BtNode::SubTree { tree_id, attributes } => {
            push_attr(out, "ID", tree_id);
            push_attrs(out, attributes);
        }
    }
    let children = node.children();
    if children.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    for child in children {
        write_node(out, child, depth + 1);
    }
    let _ = writeln!(out, "{indent}</{}>", node.tag());
}

fn push_attrs(out: &mut String, attrs: &Attributes) {
    for (k, v) in attrs {
        push_attr(out, k, v);
    }
}

fn push_attr(out: &mut String, key: &str, value: &str) {
    let _ = write!(out, " {key}=\"");
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::extract_action_set;

    pub(crate) const TEAPOT: &str = r#"<root main_tree_to_execute="MainTree">
  <BehaviorTree ID="MainTree">
    <Sequence>
      <Action ID="NAVIGATE_TO" obj="teapot"/>
      <Action ID="GRASP"       obj="teapot"/>
      <Action ID="NAVIGATE_TO" obj="stove"/>
      <Action ID="PLACE_ON_TOP" obj="stove"/>
    </Sequence>
  </BehaviorTree>
</root>"#;

    #[test]
    fn teapot_parses_into_four_actions() {
        let tree = parse_xml(TEAPOT).unwrap();
        let BtNode::Sequence { children, .. } = tree.root() else {
            panic!("expected a Sequence root");
        };
        let ids: Vec<_> = children
            .iter()
            .map(|c| match c {
                BtNode::Action(l) => l.id.as_str(),
                _ => panic!("expected only actions"),
            })
            .collect();
        assert_eq!(ids, ["NAVIGATE_TO", "GRASP", "NAVIGATE_TO", "PLACE_ON_TOP"]);
        assert_eq!(extract_action_set(&tree).len(), 3);
    }

    #[test]
    fn canonical_output_contains_normalized_action() {
        let text = serialize(&parse_xml(TEAPOT).unwrap());
        assert!(text.contains(r#"<Action ID="NAVIGATE_TO" obj="teapot"/>"#));
        assert!(text.contains(r#"<Action ID="GRASP" obj="teapot"/>"#));
    }

    #[test]
    fn single_action_sequence_is_eight_lines() {
        let tree = BehaviorTree::single(BtNode::sequence(vec![BtNode::action("GRASP", "cup")])).unwrap();
        assert_eq!(serialize(&tree).lines().count(), 8);
    }

    #[test]
    fn empty_sequence_is_a_child_arity_error() {
        let err = parse_xml(r#"<root main_tree_to_execute="T"><BehaviorTree ID="T"><Sequence/></BehaviorTree></root>"#)
            .unwrap_err();
        assert!(matches!(err, BtError::ChildArity { ref tag, .. } if tag == "Sequence"));
    }

    #[test]
    fn truncated_document_is_malformed() {
        let text = r#"<root main_tree_to_execute="MainTree">
  <BehaviorTree ID="MainTree">
    <Sequence>
      <Action ID="NAVIGATE_TO" obj="car"/>
    </Sequence>
  </BehaviorTree>
  <Action ID="NAVIGATE_TO" obj="fridge"/>
  </Sequence>"#;
        assert!(matches!(parse_xml(text), Err(BtError::MalformedXml(_))));
    }

    #[test]
    fn unknown_tags_and_missing_attributes() {
        let wrap =
            |body: &str| format!(r#"<root main_tree_to_execute="M"><BehaviorTree ID="M">{body}</BehaviorTree></root>"#);
        assert_eq!(
            parse_xml(&wrap(r#"<Parallel><Action ID="A"/></Parallel>"#)).unwrap_err(),
            BtError::UnknownTag("Parallel".into())
        );
        assert!(matches!(
            parse_xml(&wrap(r#"<Action obj="x"/>"#)).unwrap_err(),
            BtError::MissingAttribute { ref attribute, .. } if attribute == "ID"
        ));
        assert!(matches!(
            parse_xml(&wrap(r#"<RetryUntilSuccessful><Action ID="A"/></RetryUntilSuccessful>"#)).unwrap_err(),
            BtError::MissingAttribute { ref attribute, .. } if attribute == "num_attempts"
        ));
        assert!(matches!(
            parse_xml(&wrap(
                r#"<RetryUntilSuccessful num_attempts="-1"><Action ID="A"/></RetryUntilSuccessful>"#
            ))
            .unwrap_err(),
            BtError::InvalidAttribute { .. }
        ));
        assert!(matches!(
            parse_xml(&wrap(
                r#"<Timeout msec="10"><Action ID="A"/><Action ID="B"/></Timeout>"#
            ))
            .unwrap_err(),
            BtError::ChildArity { .. }
        ));
    }

    #[test]
    fn main_tree_must_exist() {
        let text = r#"<root main_tree_to_execute="Other"><BehaviorTree ID="M"><Action ID="A"/></BehaviorTree></root>"#;
        assert_eq!(parse_xml(text).unwrap_err(), BtError::MissingMainTree);
        let two = r#"<root><BehaviorTree ID="A"><Action ID="A"/></BehaviorTree><BehaviorTree ID="B"><Action ID="B"/></BehaviorTree></root>"#;
        assert_eq!(parse_xml(two).unwrap_err(), BtError::MissingMainTree);
        let one = r#"<root><BehaviorTree ID="Only"><Action ID="A"/></BehaviorTree></root>"#;
        assert_eq!(parse_xml(one).unwrap().main_tree_id(), "Only");
    }

    #[test]
    fn prose_inside_root_is_rejected() {
        let err = parse_xml("<root>Sure! Here is your behavior tree.</root>").unwrap_err();
        assert_eq!(err, BtError::UnexpectedText("root".into()));
    }

    #[test]
    fn comments_are_dropped_and_extra_attributes_kept() {
        let text = r#"<root BTCPP_format="4" main_tree_to_execute="M">
  <!-- plan -->
  <BehaviorTree ID="M">
    <Sequence name="main">
      <Action ID="PLACE_ON_TOP" obj="stove" item="teapot" _note="a&amp;b"/>
      <!-- repeat -->
    </Sequence>
  </BehaviorTree>
</root>"#;
        let tree = parse_xml(text).unwrap();
        let out = serialize(&tree);
        assert!(!out.contains("<!--"));
        assert!(out.contains(r#"<root main_tree_to_execute="M" BTCPP_format="4">"#));
        assert!(out.contains(r#"<Sequence name="main">"#));
        assert!(out.contains(r#"<Action ID="PLACE_ON_TOP" _note="a&amp;b" item="teapot" obj="stove"/>"#));
        assert_eq!(parse_xml(&out).unwrap(), tree);
    }
}

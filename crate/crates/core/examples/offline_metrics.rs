//! Structural and lexical similarity between a generated and a reference tree.

use btforge::bt::{parse_xml, serialize};
use btforge::metrics::{pooled_percentage, rouge, score_pair, Tally};

const REFERENCE: &str = r#"<root main_tree_to_execute="MainTree"><BehaviorTree ID="MainTree"><Sequence>
  <Action ID="NAVIGATE_TO" obj="teapot"/><Action ID="GRASP" obj="teapot"/>
  <Action ID="NAVIGATE_TO" obj="table"/><Action ID="PLACE_ON_TOP" obj="table"/>
</Sequence></BehaviorTree></root>"#;

const HYPOTHESIS: &str = r#"<root main_tree_to_execute="MainTree"><BehaviorTree ID="MainTree"><Sequence>
  <Action ID="NAVIGATE_TO" obj="teapot"/>
  <RetryUntilSuccessful num_attempts="2"><Action ID="PICK" obj="teapot"/></RetryUntilSuccessful>
  <Action ID="NAVIGATE_TO" obj="table"/><Action ID="PLACE_INSIDE" obj="table"/>
</Sequence></BehaviorTree></root>"#;

fn main() {
    let reference = parse_xml(REFERENCE).unwrap();
    let reference_text = serialize(&reference);
    let hypothesis_text = serialize(&parse_xml(HYPOTHESIS).unwrap());
    let s = score_pair(&hypothesis_text, &reference, &reference_text);
    println!("{s:#?}");

    let r = rouge("a b c d e f g", "a b c x d e f g");
    println!("rouge_L on a one-token insertion: {:.4}", r.rouge_l);

    // Pooling hit counts from two buckets of reference trees.
    let pct = pooled_percentage(&[Tally::new(152, 152), Tally::new(69, 76)]).unwrap();
    println!("pooled StructMatch: {pct:.2}%");
}

#[test]
fn runs() {
    main();
}

//! Parse a tree, print its canonical form and tick it with a stub executor.

use btforge::bt::{parse_xml, serialize, tick_traced, LeafKind, TickStatus};

const TREE: &str = r#"
<root main_tree_to_execute="MainTree">
  <BehaviorTree ID="MainTree">
    <Sequence>
      <Action ID="NAVIGATE_TO" obj="teapot"/>
      <RetryUntilSuccessful num_attempts="3">
        <Action ID="GRASP" obj="teapot"/>
      </RetryUntilSuccessful>
      <Action ID="NAVIGATE_TO" obj="table"/>
      <Action ID="PLACE_ON_TOP" obj="table"/>
    </Sequence>
  </BehaviorTree>
</root>"#;

fn main() {
    let tree = parse_xml(TREE).expect("example tree parses");
    print!("{}", serialize(&tree));
    println!("actions in order: {:?}", tree.actions_in_order());

    // The first grasp slips; the retry decorator asks again.
    let mut grasps = 0;
    let (status, trace) = tick_traced(&tree, |call| {
        if call.kind == LeafKind::Action && call.leaf.id == "GRASP" {
            grasps += 1;
            return Ok(if grasps == 1 {
                TickStatus::Failure
            } else {
                TickStatus::Success
            });
        }
        Ok(TickStatus::Success)
    })
    .expect("stub executor never errors");
    for event in &trace {
        println!("{event:?}");
    }
    println!("root status: {status:?}");
    assert_eq!(status, TickStatus::Success);
}

#[test]
fn runs() {
    main();
}

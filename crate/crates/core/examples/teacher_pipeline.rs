//! Two-stage teacher loop with conformance retries, then structural and
//! lexical augmentation of the resulting record.

use std::path::Path;

use btforge::conformance::PrimitiveLibrary;
use btforge::dataset::{
    derive_allowed_actions, lexical_augment, structural_augment, teacher_loop, Construct, EpisodeRecord, Provenance,
    ScriptedGenerator, Stage, SynonymMap,
};

const ANALYSIS: &str = r#"scene_analysis:
  target: "teapot"
  destination: "table"
  expanded_instruction: "Pick up the teapot from the stove and place it on the table."
  scene_context: "The teapot is on the stove; the gripper is empty."
  expected_sequence: "Navigate to the teapot, grasp it, navigate to the table, place it on top."
"#;

const INVALID: &str = r#"<root><BehaviorTree ID="MainTree"><Sequence>
  <Action ID="NAVIGATE_TO" obj="teapot"/><Action ID="STACK" obj="teapot"/>
</Sequence></BehaviorTree></root>"#;

const VALID: &str = r#"```xml
<root main_tree_to_execute="MainTree"><BehaviorTree ID="MainTree"><Sequence>
  <Action ID="NAVIGATE_TO" obj="teapot"/><Action ID="GRASP" obj="teapot"/>
  <Action ID="NAVIGATE_TO" obj="table"/><Action ID="PLACE_ON_TOP" obj="table"/>
</Sequence></BehaviorTree></root>
```"#;

fn main() {
    let library = PrimitiveLibrary::builtin();
    let mut generator = ScriptedGenerator::new()
        .respond(Stage::SceneAnalysis, ANALYSIS)
        .respond(Stage::Architect, INVALID)
        .respond(Stage::Architect, VALID);
    let instruction = "Place the teapot on the table.";
    let out = teacher_loop(&mut generator, Path::new("sheet.png"), instruction, &library, 3)
        .expect("second attempt conforms");
    println!("architect calls: {}", out.architect_calls);

    let record = EpisodeRecord {
        id: "teapot".into(),
        episode_id: "teapot".into(),
        initial_frame: "teapot/frame_000000.png".into(),
        contact_sheet: "sheets/teapot.png".into(),
        instruction: instruction.into(),
        allowed_actions: derive_allowed_actions(&out.bt_xml).unwrap(),
        scene_analysis: out.scene_analysis,
        bt_xml: out.bt_xml,
        provenance: Provenance::default(),
    };
    println!(
        "--- user turn ---\n{}\n--- assistant turn ---\n{}",
        record.user_turn(),
        record.assistant_turn()
    );

    let structural = structural_augment(&record, Construct::Retry(3), 1).expect("GRASP is action 1");
    println!("--- structural ---\n{}\n{}", structural.instruction, structural.bt_xml);

    let lexical = lexical_augment(&structural, 1.0, 1, &SynonymMap::builtin()).expect("a grasp precedes the placement");
    println!(
        "--- lexical ---\nallowed: {:?}\n{}",
        lexical.allowed_actions, lexical.bt_xml
    );
    lexical.check(&library).expect("augmented record stays consistent");
}

#[test]
fn runs() {
    main();
}

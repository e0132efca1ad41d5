//! Execute trees against a bundled task and report precondition failures.

use std::path::Path;

use btforge::bt::parse_xml;
use btforge::world::{execute, load_task, ExecutionTrace};

fn report(label: &str, trace: &ExecutionTrace) {
    println!("{label}: goal satisfied = {}", trace.goal_satisfied);
    if let Some((i, step)) = trace.first_failure() {
        println!(
            "  step {} {}({}) failed with {}",
            i + 1,
            step.action,
            step.obj.as_deref().unwrap_or(""),
            step.failure_reason().unwrap_or_default()
        );
    }
}

fn main() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let task = load_task(&data.join("tasks/carrying_in_groceries.yaml")).expect("bundled task loads");
    println!("{}\n", task.prompt(true));

    let reference = std::fs::read_to_string(data.join("reference/carrying_in_groceries.xml")).unwrap();
    let candidates = [
        ("reference plan", reference),
        (
            "grasp before opening",
            r#"<root><BehaviorTree ID="T"><Sequence>
                 <Action ID="NAVIGATE_TO" obj="beefsteak_tomato"/>
                 <Action ID="GRASP" obj="beefsteak_tomato"/>
                 <Action ID="NAVIGATE_TO" obj="electric_refrigerator"/>
                 <Action ID="OPEN" obj="electric_refrigerator"/>
               </Sequence></BehaviorTree></root>"#
                .to_string(),
        ),
        (
            "place inside before opening",
            r#"<root><BehaviorTree ID="T"><Sequence>
                 <Action ID="NAVIGATE_TO" obj="beefsteak_tomato"/>
                 <Action ID="GRASP" obj="beefsteak_tomato"/>
                 <Action ID="NAVIGATE_TO" obj="electric_refrigerator"/>
                 <Action ID="PLACE_INSIDE" obj="electric_refrigerator"/>
               </Sequence></BehaviorTree></root>"#
                .to_string(),
        ),
    ];
    for (label, xml) in &candidates {
        let tree = parse_xml(xml).expect("candidate parses");
        let trace = execute(&tree, &task.initial, &task.world, &task.goal).expect("leaves are well formed");
        report(label, &trace);
    }
}

#[test]
fn runs() {
    main();
}

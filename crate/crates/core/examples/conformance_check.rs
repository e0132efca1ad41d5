//! Gate candidate outputs on dialect validity and library membership.

use btforge::conformance::{validate, validity_rates, PrimitiveLibrary};

fn main() {
    let library = PrimitiveLibrary::builtin();
    let good = "Here is the plan:\n```xml\n<root main_tree_to_execute=\"MainTree\"><BehaviorTree ID=\"MainTree\"><Sequence><Action ID=\"NAVIGATE_TO\" obj=\"box\"/><Action ID=\"GRASP\" obj=\"box\"/></Sequence></BehaviorTree></root>\n```";
    let stack =
        r#"<root><BehaviorTree ID="T"><Sequence><Action ID="STACK" obj="box"/></Sequence></BehaviorTree></root>"#;
    let truncated = r#"<root><BehaviorTree ID="T"><Sequence><Action ID="GRASP" obj="box"/>"#;

    for (name, text) in [("good", good), ("stack", stack), ("truncated", truncated)] {
        let report = validate(text, &library, None);
        println!(
            "{name:>9}: xml={} btcpp={} unknown={:?} verdict={}",
            report.xml_valid, report.btcpp_valid, report.unknown_actions, report.verdict
        );
    }

    let allowed = ["NAVIGATE_TO".to_string()].into_iter().collect();
    let restricted = validate(good, &library, Some(&allowed));
    println!(
        "with allowed set {{NAVIGATE_TO}}: disallowed={:?}",
        restricted.disallowed_actions
    );

    let rates = validity_rates(&[good, stack, truncated], &library).expect("non-empty input");
    println!(
        "XML valid {:.2}%  BT valid {:.2}%",
        rates.xml_rate * 100.0,
        rates.btcpp_rate * 100.0
    );
}

#[test]
fn runs() {
    main();
}

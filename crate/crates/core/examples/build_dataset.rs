//! Build a small dataset end to end from synthetic episodes.

use btforge::conformance::PrimitiveLibrary;
use btforge::dataset::build::read_records;
use btforge::dataset::synthetic::{write_sources, RuleTeacher};
use btforge::dataset::{build_dataset, DatasetConfig, SynonymMap};

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let sources = work.path().join("sources");
    let out = work.path().join("out");
    write_sources(&sources, 20, 40, 11).expect("write episodes");

    let library = PrimitiveLibrary::builtin();
    let config = DatasetConfig {
        seed: 42,
        eval_count: Some(3),
        ..DatasetConfig::default()
    };
    let mut teacher = RuleTeacher::with_stack_every(4);
    let summary =
        build_dataset(&sources, &out, &config, &mut teacher, &library, &SynonymMap::builtin()).expect("pipeline runs");
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    println!("architect calls: {}", teacher.architect_calls());

    let records = read_records(&out).expect("manifest lists records");
    for r in records.iter().filter(|r| r.provenance.structurally_augmented).take(2) {
        println!("{}: {}\n  allowed {:?}", r.id, r.instruction, r.allowed_actions);
    }
    assert!(records.iter().all(|r| r.check(&library).is_ok()));
}

#[test]
fn runs() {
    main();
}

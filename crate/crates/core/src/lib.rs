//! Parse, validate, execute, score and synthesize behavior trees written in
//! the BehaviorTree.CPP XML dialect.

pub mod bt;
pub mod cli;
pub mod conformance;
pub mod dataset;
pub mod metrics;
pub mod world;

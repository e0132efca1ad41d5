use std::path::Path;

use super::generator::{GenerationRequest, Generator, GeneratorError, Stage};
use super::SceneAnalysis;
use crate::bt::{parse_xml, serialize};
use crate::conformance::{extract_xml_block, validate, PrimitiveLibrary, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum TeacherError {
    #[error("max_retries must be at least 1")]
    InvalidRetries,
    #[error(transparent)]
    GeneratorUnavailable(#[from] GeneratorError),
    #[error("malformed scene analysis: {0}")]
    MalformedSceneAnalysis(String),
    #[error("no conforming tree after {attempts} attempts")]
    RetriesExhausted {
        attempts: usize,
        last_report: Box<ValidationReport>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherOutput {
    pub scene_analysis: SceneAnalysis,
    /// Canonical serialization of the first conforming tree.
    pub bt_xml: String,
    pub architect_calls: usize,
}

/// Scene Analysis once, then the Architect stage until its output passes
/// conformance against the full library or `max_retries` calls are spent.
pub fn teacher_loop(
    generator: &mut dyn Generator,
    sheet: &Path,
    instruction: &str,
    library: &PrimitiveLibrary,
    max_retries: usize,
) -> Result<TeacherOutput, TeacherError> {
    if max_retries == 0 {
        return Err(TeacherError::InvalidRetries);
    }
    let mut request = GenerationRequest {
        stage: Stage::SceneAnalysis,
        instruction: instruction.to_string(),
        image_paths: vec![sheet.display().to_string()],
        scene_analysis: None,
        library: library.names().map(str::to_string).collect(),
    };
    let raw = generator.generate(&request)?;
    let scene_analysis = SceneAnalysis::parse(&raw).map_err(TeacherError::MalformedSceneAnalysis)?;

    request.stage = Stage::Architect;
    request.scene_analysis = Some(scene_analysis.to_yaml());
    let mut last_report = None;
    for attempt in 1..=max_retries {
        let raw = generator.generate(&request)?;
        let report = validate(&raw, library, None);
        if report.verdict {
            let tree = parse_xml(extract_xml_block(&raw)).expect("verdict implies parse");
            return Ok(TeacherOutput {
                scene_analysis,
                bt_xml: serialize(&tree),
                architect_calls: attempt,
            });
        }
        log::debug!("architect attempt {attempt} rejected: {report:?}");
        last_report = Some(report);
    }
    Err(TeacherError::RetriesExhausted {
        attempts: max_retries,
        last_report: Box::new(last_report.expect("at least one attempt")),
    })
}

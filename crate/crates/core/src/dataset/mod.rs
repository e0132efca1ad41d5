//! Instruction-tuning dataset construction: frame selection, contact sheets,
//! the two-stage teacher loop, augmentation and record assembly.

pub mod augment;
pub mod build;
pub mod frames;
pub mod generator;
pub mod sheet;
pub mod synthetic;
pub mod teacher;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bt::{parse_xml, BtError};
use crate::conformance::{validate, PrimitiveLibrary};

pub use augment::{lexical_augment, structural_augment, AugmentError, Construct, SynonymError, SynonymMap};
pub use build::{build_dataset, load_source, plan_counts, BuildError, BuildSummary, DatasetConfig, PlanCounts};
pub use frames::{fallback_embed, kcenter_greedy, subsample, DistanceMetric};
pub use generator::{
    CommandGenerator, FnGenerator, GenerationRequest, Generator, GeneratorError, HttpGenerator, ScriptedGenerator,
    Stage,
};
pub use sheet::contact_sheet;
pub use teacher::{teacher_loop, TeacherError, TeacherOutput};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("k = {k} exceeds the {available} available vectors")]
    KTooLarge { k: usize, available: usize },
    #[error("vector of dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("seed index {0} out of range")]
    SeedOutOfRange(usize),
    #[error("contact sheet needs exactly 9 frames, got {0}")]
    WrongFrameCount(usize),
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("embedding sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("episode source {path}: {message}")]
    Source { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A frame file and its capture time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub path: PathBuf,
    pub timestamp: f64,
}

/// One raw episode: temporally ordered frames and the instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSource {
    pub episode_id: String,
    pub frames: Vec<FrameRef>,
    pub instruction: String,
    pub embeddings: Option<Vec<Vec<f64>>>,
}

/// Five-field description of the scene the teacher writes before planning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneAnalysis {
    pub target: String,
    pub destination: String,
    pub expanded_instruction: String,
    pub scene_context: String,
    pub expected_sequence: String,
}

#[derive(Deserialize)]
struct PartialAnalysis {
    target: Option<serde_yaml::Value>,
    destination: Option<serde_yaml::Value>,
    expanded_instruction: Option<serde_yaml::Value>,
    scene_context: Option<serde_yaml::Value>,
    expected_sequence: Option<serde_yaml::Value>,
}

impl SceneAnalysis {
    /// Parses the YAML block, optionally fenced and optionally nested under a
    /// `scene_analysis:` key. Every field must be present and non-empty.
    pub fn parse(text: &str) -> Result<Self, String> {
        let body = fenced_body(text);
        let mut value: serde_yaml::Value = serde_yaml::from_str(body).map_err(|e| e.to_string())?;
        if let Some(inner) = value.get("scene_analysis") {
            value = inner.clone();
        }
        if !value.is_mapping() {
            return Err("scene analysis is not a mapping".into());
        }
        let partial: PartialAnalysis = serde_yaml::from_value(value).map_err(|e| e.to_string())?;
        let field = |name: &str, v: Option<serde_yaml::Value>| -> Result<String, String> {
            let text = match v {
                Some(serde_yaml::Value::String(s)) => s,
                Some(serde_yaml::Value::Sequence(items)) => {
                    items.iter().filter_map(|i| i.as_str()).collect::<Vec<_>>().join("\n")
                }
                Some(serde_yaml::Value::Null) | None => String::new(),
                Some(other) => serde_yaml::to_string(&other).unwrap_or_default().trim().to_string(),
            };
            if text.trim().is_empty() {
                Err(format!("missing field `{name}`"))
            } else {
                Ok(text)
            }
        };
        Ok(SceneAnalysis {
            target: field("target", partial.target)?,
            destination: field("destination", partial.destination)?,
            expanded_instruction: field("expanded_instruction", partial.expanded_instruction)?,
            scene_context: field("scene_context", partial.scene_context)?,
            expected_sequence: field("expected_sequence", partial.expected_sequence)?,
        })
    }

    pub fn to_yaml(&self) -> String {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            scene_analysis: &'a SceneAnalysis,
        }
        serde_yaml::to_string(&Wrapper { scene_analysis: self }).expect("plain strings serialize")
    }
}

fn fenced_body(text: &str) -> &str {
    let Some(start) = text.find("```") else {
        return text;
    };
    let after = &text[start + 3..];
    let body = after.split_once('\n').map_or("", |(_, rest)| rest);
    body.find("```").map_or(body, |end| &body[..end])
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub structurally_augmented: bool,
    pub lexically_augmented: bool,
}

/// One training sample. The user turn carries the initial frame, the
/// instruction and the allowed actions; the assistant turn carries the scene
/// analysis followed by the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub id: String,
    pub episode_id: String,
    pub initial_frame: String,
    pub contact_sheet: String,
    pub instruction: String,
    pub allowed_actions: Vec<String>,
    pub scene_analysis: SceneAnalysis,
    pub bt_xml: String,
    pub provenance: Provenance,
}

impl EpisodeRecord {
    pub fn user_turn(&self) -> String {
        format!(
            "Instruction: {}\nAllowed actions: {}",
            self.instruction,
            self.allowed_actions.join(", ")
        )
    }

    pub fn assistant_turn(&self) -> String {
        format!("{}\n{}", self.scene_analysis.to_yaml(), self.bt_xml)
    }

    /// Checks that the tree conforms to `library` and only uses allowed actions.
    pub fn check(&self, library: &PrimitiveLibrary) -> Result<(), String> {
        let allowed = self.allowed_actions.iter().cloned().collect();
        let report = validate(&self.bt_xml, library, Some(&allowed));
        if report.verdict {
            Ok(())
        } else {
            Err(format!("record {} is inconsistent: {report:?}", self.id))
        }
    }
}

/// Distinct Action ids of a tree document in first-appearance order.
pub fn derive_allowed_actions(bt_xml: &str) -> Result<Vec<String>, BtError> {
    Ok(parse_xml(bt_xml)?.actions_in_order())
}

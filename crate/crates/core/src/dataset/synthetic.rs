//! Synthetic episode sources and a rule-based teacher, for demos and tests
//! that must run without a model.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::generator::{GenerationRequest, Generator, GeneratorError, Stage};

const OBJECTS: [&str; 8] = ["cup", "bowl", "apple", "book", "towel", "plate", "mug", "sponge"];
const SURFACES: [&str; 4] = ["table", "shelf", "counter", "desk"];

/// Writes `count` episode directories named `episode_000`, `episode_001`, ...
/// Each has `frames` small PNG frames, a `meta.yaml` with an instruction of
/// the form "Put the <object> on the <surface>." and, for every third
/// episode, an `embeddings.csv` sidecar.
pub fn write_sources(root: &Path, count: usize, frames: usize, seed: u64) -> io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for e in 0..count {
        let dir = root.join(format!("episode_{e:03}"));
        fs::create_dir_all(&dir)?;
        let object = OBJECTS[rng.gen_range(0..OBJECTS.len())];
        let surface = SURFACES[rng.gen_range(0..SURFACES.len())];
        let base: [u8; 3] = rng.gen();
        let mut rows = String::new();
        for f in 0..frames {
            let t = f as f64 / frames.max(1) as f64;
            let img = RgbImage::from_fn(24, 16, |x, y| {
                let moving = ((x as f64 / 24.0 - t).abs() < 0.2) as u8;
                Rgb([
                    base[0].wrapping_add((x * 4) as u8),
                    base[1].wrapping_add((y * 6) as u8),
                    base[2].wrapping_add(moving * 120),
                ])
            });
            img.save(dir.join(format!("frame_{f:06}.png")))
                .map_err(|e| io::Error::other(e.to_string()))?;
            rows.push_str(&format!(
                "{:.4},{:.4},{:.4}\n",
                t,
                (t * 6.0).sin(),
                base[0] as f64 / 255.0
            ));
        }
        let timestamps: Vec<String> = (0..frames).map(|f| format!("{:.2}", f as f64 * 0.1)).collect();
        fs::write(
            dir.join("meta.yaml"),
            format!(
                "instruction: Put the {object} on the {surface}.\ntimestamps: [{}]\n",
                timestamps.join(", ")
            ),
        )?;
        if e % 3 == 2 {
            fs::write(dir.join("embeddings.csv"), rows)?;
        }
    }
    Ok(())
}

fn object_and_surface(instruction: &str) -> Option<(String, String)> {
    let rest = instruction.strip_prefix("Put the ")?;
    let (object, surface) = rest.split_once(" on the ")?;
    Some((object.to_string(), surface.trim_end_matches('.').to_string()))
}

/// Teacher for instructions of the form "Put the X on the Y.": a scene
/// analysis and a four-step pick-and-place tree. Every `stack_every`-th
/// instruction (by first appearance) gets one non-conforming `STACK` tree
/// before the valid one.
#[derive(Debug, Default)]
pub struct RuleTeacher {
    stack_every: Option<usize>,
    seen: HashMap<String, usize>,
    architect_calls: HashMap<String, usize>,
}

impl RuleTeacher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_stack_every(n: usize) -> Self {
        RuleTeacher {
            stack_every: Some(n.max(1)),
            ..Self::default()
        }
    }

    pub fn architect_calls(&self) -> usize {
        self.architect_calls.values().sum()
    }
}

impl Generator for RuleTeacher {
    fn generate(&mut self, request: &GenerationRequest) -> Result<String, GeneratorError> {
        let (object, surface) = object_and_surface(&request.instruction)
            .ok_or_else(|| GeneratorError::Protocol(format!("unsupported instruction: {}", request.instruction)))?;
        let next = self.seen.len();
        let ordinal = *self.seen.entry(request.instruction.clone()).or_insert(next);
        match request.stage {
            Stage::SceneAnalysis => Ok(format!(
                "scene_analysis:\n  target: \"{object}\"\n  destination: \"{surface}\"\n  expanded_instruction: \"Pick up the {object} and place it on top of the {surface}.\"\n  scene_context: \"The {object} rests away from the {surface}; the gripper is empty.\"\n  expected_sequence: \"Navigate to the {object}, grasp it, navigate to the {surface}, place it on top.\"\n"
            )),
            Stage::Architect => {
                let calls = self.architect_calls.entry(request.instruction.clone()).or_default();
                *calls += 1;
                let first_id = match self.stack_every {
                    Some(n) if ordinal.is_multiple_of(n) && *calls == 1 => "STACK",
                    _ => "NAVIGATE_TO",
                };
                Ok(format!(
                    "```xml\n<root main_tree_to_execute=\"MainTree\">\n  <BehaviorTree ID=\"MainTree\">\n    <Sequence>\n      <Action ID=\"{first_id}\" obj=\"{object}\"/>\n      <Action ID=\"GRASP\" obj=\"{object}\"/>\n      <Action ID=\"NAVIGATE_TO\" obj=\"{surface}\"/>\n      <Action ID=\"PLACE_ON_TOP\" obj=\"{surface}\"/>\n    </Sequence>\n  </BehaviorTree>\n</root>\n```\n"
                ))
            }
        }
    }
}

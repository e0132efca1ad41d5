//! Wire protocol to an external text generator.
//!
//! A request is one JSON object:
//!
//! ```json
//! {"stage": "architect", "instruction": "...", "image_paths": ["sheet.png"],
//!  "scene_analysis": "scene_analysis:\n  target: ...", "library": ["NAVIGATE_TO", "..."]}
//! ```
//!
//! `scene_analysis` is omitted for the first stage. The response is the raw
//! generated text. [`CommandGenerator`] writes the request to a child
//! process's stdin and reads its stdout; [`HttpGenerator`] POSTs it.

use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SceneAnalysis,
    Architect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub stage: Stage,
    pub instruction: String,
    pub image_paths: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_analysis: Option<String>,
    pub library: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("generator unavailable: {0}")]
    Unavailable(String),
    #[error("generator protocol error: {0}")]
    Protocol(String),
}

pub trait Generator {
    fn generate(&mut self, request: &GenerationRequest) -> Result<String, GeneratorError>;
}

/// Runs `sh -c <command>` once per request.
#[derive(Debug, Clone)]
pub struct CommandGenerator {
    command: String,
}

impl CommandGenerator {
    pub fn new(command: impl Into<String>) -> Self {
        CommandGenerator {
            command: command.into(),
        }
    }
}

impl Generator for CommandGenerator {
    fn generate(&mut self, request: &GenerationRequest) -> Result<String, GeneratorError> {
        let payload = serde_json::to_vec(request).map_err(|e| GeneratorError::Protocol(e.to_string()))?;
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| GeneratorError::Unavailable(format!("{}: {e}", self.command)))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || {
            // The child may exit without reading; a broken pipe is not our error.
            let _ = stdin.write_all(&payload).and_then(|_| stdin.write_all(b"\n"));
        });
        let mut stdout = String::new();
        child
            .stdout
            .take()
            .expect("piped stdout")
            .read_to_string(&mut stdout)
            .map_err(|e| GeneratorError::Protocol(e.to_string()))?;
        let mut stderr = String::new();
        let _ = child.stderr.take().expect("piped stderr").read_to_string(&mut stderr);
        let status = child.wait().map_err(|e| GeneratorError::Unavailable(e.to_string()))?;
        let _ = writer.join();
        if !status.success() {
            return Err(GeneratorError::Unavailable(format!(
                "`{}` exited with {status}: {}",
                self.command,
                stderr.trim()
            )));
        }
        Ok(stdout)
    }
}

/// POSTs each request as JSON to a fixed URL; the response body is the output.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    url: String,
}

impl HttpGenerator {
    pub fn new(url: impl Into<String>) -> Self {
        HttpGenerator { url: url.into() }
    }
}

impl Generator for HttpGenerator {
    fn generate(&mut self, request: &GenerationRequest) -> Result<String, GeneratorError> {
        let payload = serde_json::to_string(request).map_err(|e| GeneratorError::Protocol(e.to_string()))?;
        let mut response = ureq::post(&self.url)
            .header("Content-Type", "application/json")
            .send(payload.as_str())
            .map_err(|e| GeneratorError::Unavailable(format!("{}: {e}", self.url)))?;
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| GeneratorError::Protocol(e.to_string()))
    }
}

/// Deterministic mock: replays a fixed script per stage and records every
/// request. Once a stage's script runs out its last response repeats.
#[derive(Debug, Clone, Default)]
pub struct ScriptedGenerator {
    scripts: HashMap<Stage, VecDeque<String>>,
    last: HashMap<Stage, String>,
    requests: Vec<GenerationRequest>,
}

impl ScriptedGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn respond(mut self, stage: Stage, response: impl Into<String>) -> Self {
        self.scripts.entry(stage).or_default().push_back(response.into());
        self
    }

    pub fn requests(&self) -> &[GenerationRequest] {
        &self.requests
    }

    pub fn calls(&self, stage: Stage) -> usize {
        self.requests.iter().filter(|r| r.stage == stage).count()
    }
}

impl Generator for ScriptedGenerator {
    fn generate(&mut self, request: &GenerationRequest) -> Result<String, GeneratorError> {
        self.requests.push(request.clone());
        let stage = request.stage;
        if let Some(next) = self.scripts.get_mut(&stage).and_then(VecDeque::pop_front) {
            self.last.insert(stage, next.clone());
            return Ok(next);
        }
        self.last
            .get(&stage)
            .cloned()
            .ok_or_else(|| GeneratorError::Unavailable(format!("no scripted response for {stage:?}")))
    }
}

/// Adapts a closure into a [`Generator`].
pub struct FnGenerator<F>(pub F);

impl<F> Generator for FnGenerator<F>
where
    F: FnMut(&GenerationRequest) -> Result<String, GeneratorError>,
{
    fn generate(&mut self, request: &GenerationRequest) -> Result<String, GeneratorError> {
        (self.0)(request)
    }
}

impl<G: Generator + ?Sized> Generator for &mut G {
    fn generate(&mut self, request: &GenerationRequest) -> Result<String, GeneratorError> {
        (**self).generate(request)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn generate(&mut self, request: &GenerationRequest) -> Result<String, GeneratorError> {
        (**self).generate(request)
    }
}

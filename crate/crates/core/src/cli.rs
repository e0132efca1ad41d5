//! `btforge` command line: `validate`, `exec`, `score`, `suite` and `dataset`.
//!
//! Exit codes: 0 success, 1 domain failure (an invalid tree, an unsatisfied
//! goal, a failed episode), 2 usage, I/O or schema error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bt::parse_xml;
use crate::conformance::{extract_xml_block, validate, PrimitiveLibrary, ValidationReport};
use crate::dataset::{
    build_dataset, CommandGenerator, DatasetConfig, FnGenerator, GenerationRequest, Generator, GeneratorError,
    HttpGenerator, Stage, SynonymMap,
};
use crate::metrics::{aggregate_suite, score_pair, summarize, PairScore};
use crate::world::{execute, load_task, load_task_dir, ExecutionTrace, TaskBundle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "btforge",
    version,
    about = "Validate, execute, score and synthesize behavior trees"
)]
struct Cli {
    /// Primitive library file (one primitive and its required attributes per line).
    #[arg(long, global = true, env = "BTFORGE_LIBRARY")]
    library: Option<PathBuf>,
    /// `table` for people, `records` for one JSON object per line.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Records,
}

#[derive(Debug, Args)]
struct GeneratorArgs {
    /// Shell command that reads a JSON request on stdin and prints the output.
    #[arg(long, conflicts_with = "generator_url")]
    generator_cmd: Option<String>,
    /// URL that accepts a JSON request by POST and returns the output.
    #[arg(long)]
    generator_url: Option<String>,
}

impl GeneratorArgs {
    fn build(&self) -> Option<Box<dyn Generator>> {
        match (&self.generator_cmd, &self.generator_url) {
            (Some(cmd), _) => Some(Box::new(CommandGenerator::new(cmd.clone()))),
            (None, Some(url)) => Some(Box::new(HttpGenerator::new(url.clone()))),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check tree files for well-formedness, dialect validity and library membership.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Comma-separated allowed actions; Actions outside it are rejected.
        #[arg(long, value_delimiter = ',')]
        allowed: Option<Vec<String>>,
    },
    /// Execute tree files against a task in the symbolic world.
    Exec {
        #[arg(long)]
        task: PathBuf,
        #[arg(required = true)]
        trees: Vec<PathBuf>,
    },
    /// Score hypothesis trees against references, pairing files by name.
    Score {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
    },
    /// Run k attempts per task and report BT-Valid, SR and Pass@k.
    Suite {
        #[arg(long)]
        tasks: PathBuf,
        /// Directory of precomputed outputs: `<outputs>/<task>/attempt_<i>.xml`.
        #[arg(long, conflicts_with_all = ["generator_cmd", "generator_url"])]
        outputs: Option<PathBuf>,
        #[command(flatten)]
        generator: GeneratorArgs,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        attempts: u32,
        /// Append each task's workflow to the prompt sent to the generator.
        #[arg(long)]
        cot: bool,
        /// Also write the full result as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an instruction-tuning dataset from episode directories.
    Dataset {
        sources: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// YAML dataset configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Synonym groups for lexical augmentation.
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[command(flatten)]
        generator: GeneratorArgs,
    },
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

type CmdResult = Result<i32, Usage>;

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    format: Format,
}

impl Io<'_> {
    fn record(&mut self, value: &impl Serialize) {
        let _ = writeln!(self.out, "{}", serde_json::to_string(value).expect("records serialize"));
    }

    fn line(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.out, "{}", text.as_ref());
    }

    fn warn(&mut self, text: impl AsRef<str>) {
        log::warn!("{}", text.as_ref());
        let _ = writeln!(self.err, "warning: {}", text.as_ref());
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let mut io = Io {
        out,
        err,
        format: cli.format,
    };
    let result = load_library(cli.library.as_deref()).and_then(|library| match &cli.command {
        Command::Validate { files, allowed } => cmd_validate(&mut io, &library, files, allowed.as_deref()),
        Command::Exec { task, trees } => cmd_exec(&mut io, task, trees),
        Command::Score { reference, hypothesis } => cmd_score(&mut io, reference, hypothesis),
        Command::Suite {
            tasks,
            outputs,
            generator,
            attempts,
            cot,
            out,
        } => {
            let source = match (outputs, generator.build()) {
                (Some(dir), _) => Candidates::Precomputed(dir.clone()),
                (None, Some(g)) => Candidates::Generated {
                    generator: g,
                    cot: *cot,
                },
                (None, None) => {
                    return Err(Usage(
                        "suite needs --outputs, --generator-cmd or --generator-url".into(),
                    ))
                }
            };
            cmd_suite(&mut io, &library, tasks, source, *attempts as usize, out.as_deref())
        }
        Command::Dataset {
            sources,
            out,
            config,
            seed,
            synonyms,
            generator,
        } => cmd_dataset(
            &mut io,
            &library,
            sources,
            out,
            config.as_deref(),
            *seed,
            synonyms.as_deref(),
            generator.build(),
        ),
    });
    match result {
        Ok(code) => code,
        Err(Usage(message)) => {
            let _ = writeln!(io.err, "error: {message}");
            EXIT_USAGE
        }
    }
}

fn load_library(path: Option<&Path>) -> Result<PrimitiveLibrary, Usage> {
    match path {
        Some(p) => PrimitiveLibrary::load(p).map_err(|e| Usage(format!("library {}: {e}", p.display()))),
        None => Ok(PrimitiveLibrary::builtin()),
    }
}

fn require_files(paths: &[PathBuf]) -> Result<(), Usage> {
    match paths.iter().find(|p| !p.is_file()) {
        Some(p) => Err(Usage(format!("{}: no such file", p.display()))),
        None => Ok(()),
    }
}

fn require_dir(path: &Path) -> Result<(), Usage> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Usage(format!("{}: no such directory", path.display())))
    }
}

fn read(path: &Path) -> Result<String, Usage> {
    fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))
}

fn describe(report: &ValidationReport) -> String {
    if report.verdict {
        return "ok".into();
    }
    let mut parts = Vec::new();
    if let Some(e) = &report.error {
        parts.push(e.clone());
    }
    if !report.unknown_actions.is_empty() {
        parts.push(format!("unknown actions: {}", report.unknown_actions.join(", ")));
    }
    if !report.disallowed_actions.is_empty() {
        parts.push(format!("not allowed: {}", report.disallowed_actions.join(", ")));
    }
    if !report.missing_attributes.is_empty() {
        let missing: Vec<_> = report
            .missing_attributes
            .iter()
            .map(|m| format!("{}.{}", m.action, m.attribute))
            .collect();
        parts.push(format!("missing attributes: {}", missing.join(", ")));
    }
    format!("INVALID {}", parts.join("; "))
}

fn cmd_validate(io: &mut Io, library: &PrimitiveLibrary, files: &[PathBuf], allowed: Option<&[String]>) -> CmdResult {
    require_files(files)?;
    let allowed: Option<BTreeSet<String>> = allowed.map(|a| a.iter().map(|s| s.trim().to_string()).collect());
    let mut invalid = 0;
    for file in files {
        let report = validate(&read(file)?, library, allowed.as_ref());
        invalid += usize::from(!report.verdict);
        match io.format {
            Format::Table => io.line(format!("{}: {}", file.display(), describe(&report))),
            Format::Records => io.record(&json!({"file": file, "report": report})),
        }
    }
    match io.format {
        Format::Table => io.line(format!("{} of {} files valid", files.len() - invalid, files.len())),
        Format::Records => io.record(&json!({"summary": {"files": files.len(), "invalid": invalid}})),
    }
    Ok(if invalid == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn run_tree(text: &str, task: &TaskBundle) -> Result<ExecutionTrace, String> {
    let tree = parse_xml(extract_xml_block(text)).map_err(|e| e.to_string())?;
    execute(&tree, &task.initial, &task.world, &task.goal).map_err(|e| e.to_string())
}

fn cmd_exec(io: &mut Io, task_path: &Path, trees: &[PathBuf]) -> CmdResult {
    require_files(std::slice::from_ref(&task_path.to_path_buf()))?;
    require_files(trees)?;
    let task = load_task(task_path)?;
    let mut failed = 0;
    for file in trees {
        let result = run_tree(&read(file)?, &task);
        let satisfied = matches!(&result, Ok(t) if t.goal_satisfied);
        failed += usize::from(!satisfied);
        match (io.format, &result) {
            (Format::Records, Ok(trace)) => io.record(&json!({"file": file, "trace": trace})),
            (Format::Records, Err(e)) => io.record(&json!({"file": file, "goal_satisfied": false, "error": e})),
            (Format::Table, Ok(trace)) => {
                io.line(format!(
                    "{}: goal {} (tree {:?}, {} steps)",
                    file.display(),
                    if trace.goal_satisfied {
                        "satisfied"
                    } else {
                        "not satisfied"
                    },
                    trace.final_status,
                    trace.steps.len()
                ));
                if let Some((i, step)) = trace.first_failure() {
                    io.line(format!(
                        "  step {} {}({}) failed: {}",
                        i + 1,
                        step.action,
                        step.obj.as_deref().unwrap_or(""),
                        step.failure_reason().unwrap_or_default()
                    ));
                }
            }
            (Format::Table, Err(e)) => io.line(format!("{}: error: {e}", file.display())),
        }
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

fn xml_files(dir: &Path) -> Result<Vec<String>, Usage> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(".xml"))
        .collect();
    names.sort();
    Ok(names)
}

fn cmd_score(io: &mut Io, reference: &Path, hypothesis: &Path) -> CmdResult {
    require_dir(reference)?;
    require_dir(hypothesis)?;
    let refs = xml_files(reference)?;
    let hyps: BTreeSet<String> = xml_files(hypothesis)?.into_iter().collect();
    for name in hyps.iter().filter(|h| !refs.contains(h)) {
        io.warn(format!("hypothesis {name} has no reference; skipped"));
    }
    let mut scores: Vec<PairScore> = Vec::new();
    for name in &refs {
        if !hyps.contains(name) {
            io.warn(format!("reference {name} has no hypothesis; skipped"));
            continue;
        }
        let ref_text = read(&reference.join(name))?;
        let ref_tree = parse_xml(extract_xml_block(&ref_text)).map_err(|e| Usage(format!("reference {name}: {e}")))?;
        let score = score_pair(&read(&hypothesis.join(name))?, &ref_tree, &ref_text);
        match io.format {
            Format::Table => io.line(format!(
                "{name}: struct_match={} jaccard={:.3} bleu={:.3} rouge1={:.3} rouge2={:.3} rougeL={:.3} rougeLsum={:.3}",
                score.struct_match,
                score.action_jaccard,
                score.bleu,
                score.rouge_1,
                score.rouge_2,
                score.rouge_l,
                score.rouge_lsum
            )),
            Format::Records => io.record(&json!({"file": name, "score": score})),
        }
        scores.push(score);
    }
    let summary = summarize(&scores).ok_or_else(|| Usage("no reference/hypothesis pairs to score".into()))?;
    match io.format {
        Format::Table => io.line(format!(
            "pairs {}  StructMatch {:.2}%  Jaccard {:.3}±{:.3}  BLEU {:.3}  ROUGE-1 {:.3}  ROUGE-2 {:.3}  ROUGE-L {:.3}  ROUGE-Lsum {:.3}",
            summary.pairs,
            summary.struct_match_pct,
            summary.jaccard_mean,
            summary.jaccard_std,
            summary.bleu,
            summary.rouge_1,
            summary.rouge_2,
            summary.rouge_l,
            summary.rouge_lsum
        )),
        Format::Records => io.record(&json!({ "summary": summary })),
    }
    Ok(EXIT_OK)
}

enum Candidates {
    Precomputed(PathBuf),
    Generated { generator: Box<dyn Generator>, cot: bool },
}

#[derive(Serialize)]
struct Attempt {
    verdict: bool,
    goal_satisfied: bool,
    success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn evaluate_candidate(text: &str, task: &TaskBundle, library: &PrimitiveLibrary) -> Attempt {
    let report = validate(text, library, Some(&task.allowed_set()));
    let (goal_satisfied, error) = match run_tree(text, task) {
        Ok(trace) => (trace.goal_satisfied, None),
        Err(e) => (false, Some(e)),
    };
    let error = error.or_else(|| (!report.verdict).then(|| describe(&report)));
    Attempt {
        verdict: report.verdict,
        goal_satisfied,
        success: report.verdict && goal_satisfied,
        error,
    }
}

fn cmd_suite(
    io: &mut Io,
    library: &PrimitiveLibrary,
    tasks_dir: &Path,
    mut source: Candidates,
    k: usize,
    out: Option<&Path>,
) -> CmdResult {
    require_dir(tasks_dir)?;
    if let Candidates::Precomputed(dir) = &source {
        require_dir(dir)?;
    }
    let tasks = load_task_dir(tasks_dir)?;
    let mut rows = Vec::new();
    for (_, task) in &tasks {
        let mut texts = Vec::with_capacity(k);
        match &mut source {
            Candidates::Precomputed(dir) => {
                for i in 1..=k {
                    let path = dir.join(&task.name).join(format!("attempt_{i}.xml"));
                    if !path.is_file() {
                        return Err(Usage(format!(
                            "task {} has {} of {k} attempts ({} missing)",
                            task.name,
                            i - 1,
                            path.display()
                        )));
                    }
                    texts.push(read(&path)?);
                }
            }
            Candidates::Generated { generator, cot } => {
                let request = GenerationRequest {
                    stage: Stage::Architect,
                    instruction: task.prompt(*cot),
                    image_paths: task.image.iter().map(|p| p.display().to_string()).collect(),
                    scene_analysis: None,
                    library: task.allowed_actions.clone(),
                };
                for _ in 0..k {
                    texts.push(
                        generator
                            .generate(&request)
                            .map_err(|e| Usage(format!("task {}: {e}", task.name)))?,
                    );
                }
            }
        }
        let attempts: Vec<Attempt> = texts.iter().map(|t| evaluate_candidate(t, task, library)).collect();
        rows.push((task, attempts));
    }
    let outcomes: Vec<Vec<bool>> = rows
        .iter()
        .map(|(_, a)| a.iter().map(|x| x.success).collect())
        .collect();
    let first_valid: Vec<bool> = rows.iter().map(|(_, a)| a[0].verdict).collect();
    let result = aggregate_suite(&outcomes, &first_valid)?;

    let task_records: Vec<_> = rows
        .iter()
        .map(|(task, attempts)| {
            json!({
                "task": task.name,
                "difficulty": task.difficulty,
                "type": task.task_type,
                "attempts": attempts,
            })
        })
        .collect();
    let summary = json!({
        "tasks": rows.len(),
        "attempts": k,
        "bt_valid": result.bt_valid_rate,
        "sr": result.sr,
        "pass_at_k": result.pass_at_k,
    });
    match io.format {
        Format::Records => {
            for r in &task_records {
                io.record(r);
            }
            io.record(&json!({ "summary": summary }));
        }
        Format::Table => {
            io.line(format!("{:<36} {:<8} {:<6} outcomes", "task", "level", "valid"));
            for (task, attempts) in &rows {
                let marks: String = attempts.iter().map(|a| if a.success { 'S' } else { '.' }).collect();
                io.line(format!(
                    "{:<36} {:<8} {:<6} {marks}",
                    task.name,
                    format!("{:?}", task.difficulty),
                    if attempts[0].verdict { "yes" } else { "no" }
                ));
            }
            io.line(format!(
                "BT-Valid {:.0}%  SR {:.0}%  Pass@{k} {:.0}%",
                result.bt_valid_rate * 100.0,
                result.sr * 100.0,
                result.pass_at_k * 100.0
            ));
        }
    }
    if let Some(path) = out {
        let doc = json!({"tasks": task_records, "summary": summary});
        fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")
            .map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_dataset(
    io: &mut Io,
    library: &PrimitiveLibrary,
    sources: &Path,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    synonyms: Option<&Path>,
    generator: Option<Box<dyn Generator>>,
) -> CmdResult {
    require_dir(sources)?;
    let mut config = match config {
        Some(p) => DatasetConfig::load(p)?,
        None => DatasetConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let synonyms = match synonyms {
        Some(p) => SynonymMap::load(p, library)?,
        None => SynonymMap::parse(include_str!("../data/synonyms.txt"), library)?,
    };
    let mut generator = generator.unwrap_or_else(|| {
        Box::new(FnGenerator(|_: &GenerationRequest| {
            Err(GeneratorError::Unavailable(
                "no generator configured (use --generator-cmd or --generator-url)".into(),
            ))
        }))
    });
    let summary = build_dataset(sources, out, &config, &mut generator, library, &synonyms)?;
    match io.format {
        Format::Records => io.record(&summary),
        Format::Table => {
            io.line(format!(
                "episodes {}  base {}  structural {}  total {}  lexical {}  train {}  eval {}  failed {}",
                summary.episodes,
                summary.base,
                summary.structural,
                summary.total,
                summary.lexically_augmented,
                summary.train,
                summary.eval,
                summary.failed_episodes
            ));
            for f in &summary.failures {
                io.line(format!("  {} [{}]: {}", f.episode_id, f.stage, f.message));
            }
        }
    }
    Ok(if summary.failed_episodes == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("btforge").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_args(&[]).0, EXIT_USAGE);
        assert_eq!(run_args(&["validate"]).0, EXIT_USAGE);
        let (code, _, err) = run_args(&["validate", "/nonexistent/tree.xml"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("/nonexistent/tree.xml"));
        assert_eq!(run_args(&["suite", "--tasks", ".", "--attempts", "0"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }
}

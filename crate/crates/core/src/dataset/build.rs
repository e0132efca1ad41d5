//! End-to-end dataset construction from episode directories on disk.
//!
//! Source layout, one directory per episode:
//!
//! ```text
//! <sources>/<episode_id>/frame_000000.png
//!                        frame_000001.png ...
//!                        meta.yaml        # instruction: ..., timestamps: [..] (optional)
//!                        embeddings.csv   # optional, one row per frame
//! ```
//!
//! Output layout:
//!
//! ```text
//! <out>/records/<record_id>.json
//! <out>/sheets/<episode_id>.png
//! <out>/manifest.jsonl   # one line per record, sorted by id
//! <out>/summary.json
//! <out>/failures.jsonl   # episodes or stages that were skipped
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::augment::{lexical_augment, main_action_count, structural_augment, Construct, SynonymMap};
use super::frames::{embed_path, kcenter_greedy, load_image, read_embeddings, subsample, DistanceMetric};
use super::generator::Generator;
use super::sheet::{contact_sheet, SHEET_FRAMES};
use super::teacher::teacher_loop;
use super::{derive_allowed_actions, DatasetError, EpisodeRecord, EpisodeSource, FrameRef, Provenance};
use crate::bt::parse_xml;
use crate::conformance::PrimitiveLibrary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub stride: usize,
    pub kcenter_seed_index: usize,
    pub metric: DistanceMetric,
    pub structural_fraction: f64,
    pub lexical_probability: f64,
    /// Share of the final records held out for evaluation, unless `eval_count` is set.
    pub eval_fraction: f64,
    pub eval_count: Option<usize>,
    pub max_retries: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 0,
            stride: 10,
            kcenter_seed_index: 0,
            metric: DistanceMetric::Euclidean,
            structural_fraction: 0.5,
            lexical_probability: 0.5,
            eval_fraction: 0.1,
            eval_count: None,
            max_retries: 3,
        }
    }
}

impl DatasetConfig {
    pub fn load(path: &Path) -> Result<Self, BuildError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let config: Self =
            serde_yaml::from_str(&text).map_err(|e| BuildError::Config(format!("{}: {e}", path.display())))?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<(), BuildError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(BuildError::Config(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("structural_fraction", self.structural_fraction)?;
        unit("lexical_probability", self.lexical_probability)?;
        unit("eval_fraction", self.eval_fraction)?;
        if self.stride == 0 {
            return Err(BuildError::Config("stride must be at least 1".into()));
        }
        if self.max_retries == 0 {
            return Err(BuildError::Config("max_retries must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> BuildError {
    BuildError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Record counts implied by a configuration for `base` successful episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCounts {
    pub base: usize,
    pub structural: usize,
    pub total: usize,
    pub train: usize,
    pub eval: usize,
}

pub fn plan_counts(base: usize, config: &DatasetConfig) -> PlanCounts {
    let structural = (base as f64 * config.structural_fraction).round() as usize;
    let total = base + structural;
    let eval = config
        .eval_count
        .unwrap_or_else(|| (total as f64 * config.eval_fraction).round() as usize)
        .min(total);
    PlanCounts {
        base,
        structural,
        total,
        train: total - eval,
        eval,
    }
}

/// Seed for an independent random stream keyed by `label`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub episode_id: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub episode_id: String,
    pub split: Split,
    pub file: String,
    pub structurally_augmented: bool,
    pub lexically_augmented: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub episodes: usize,
    pub base: usize,
    pub structural: usize,
    pub total: usize,
    pub lexically_augmented: usize,
    pub train: usize,
    pub eval: usize,
    pub failed_episodes: usize,
    pub failures: Vec<Failure>,
}

#[derive(Deserialize)]
struct Meta {
    instruction: String,
    #[serde(default)]
    timestamps: Option<Vec<f64>>,
}

fn is_frame_name(name: &str) -> bool {
    name.strip_prefix("frame_")
        .and_then(|rest| rest.strip_suffix(".png"))
        .is_some_and(|digits| digits.len() == 6 && digits.bytes().all(|b| b.is_ascii_digit()))
}

/// Reads one episode directory.
pub fn load_source(dir: &Path) -> Result<EpisodeSource, DatasetError> {
    let bad = |message: String| DatasetError::Source {
        path: dir.to_path_buf(),
        message,
    };
    let episode_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| bad("directory name is not valid UTF-8".into()))?
        .to_string();
    let entries = fs::read_dir(dir).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| is_frame_name(n))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(bad("no frame_NNNNNN.png files".into()));
    }

    let meta_path = dir.join("meta.yaml");
    let meta_text = fs::read_to_string(&meta_path).map_err(|source| DatasetError::Io {
        path: meta_path.clone(),
        source,
    })?;
    let meta: Meta = serde_yaml::from_str(&meta_text).map_err(|e| bad(format!("meta.yaml: {e}")))?;
    let timestamps = match meta.timestamps {
        Some(ts) if ts.len() != names.len() => {
            return Err(bad(format!("{} timestamps for {} frames", ts.len(), names.len())))
        }
        Some(ts) => ts,
        None => (0..names.len()).map(|i| i as f64).collect(),
    };
    if timestamps.windows(2).any(|w| w[1] < w[0]) {
        return Err(bad("timestamps decrease".into()));
    }

    let sidecar = dir.join("embeddings.csv");
    let embeddings = if sidecar.exists() {
        let rows = read_embeddings(&sidecar)?;
        if rows.len() != names.len() {
            return Err(DatasetError::Sidecar {
                path: sidecar,
                message: format!("{} rows for {} frames", rows.len(), names.len()),
            });
        }
        Some(rows)
    } else {
        None
    };

    Ok(EpisodeSource {
        episode_id,
        frames: names
            .iter()
            .zip(timestamps)
            .map(|(n, timestamp)| FrameRef {
                path: dir.join(n),
                timestamp,
            })
            .collect(),
        instruction: meta.instruction.trim().to_string(),
        embeddings,
    })
}

/// Picks the nine sheet frames: stride sub-sampling, then k-center over the
/// embeddings. Episodes whose sub-sample is too short fall back to all frames.
pub fn select_frames(source: &EpisodeSource, config: &DatasetConfig) -> Result<Vec<usize>, DatasetError> {
    let all: Vec<usize> = (0..source.frames.len()).collect();
    let mut candidates = subsample(&all, config.stride);
    if candidates.len() < SHEET_FRAMES {
        candidates = all;
    }
    if candidates.len() < SHEET_FRAMES {
        return Err(DatasetError::KTooLarge {
            k: SHEET_FRAMES,
            available: candidates.len(),
        });
    }
    let vectors = candidates
        .iter()
        .map(|&i| match &source.embeddings {
            Some(rows) => Ok(rows[i].clone()),
            None => embed_path(&source.frames[i].path),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let picked = kcenter_greedy(&vectors, SHEET_FRAMES, config.kcenter_seed_index, config.metric)?;
    Ok(picked.into_iter().map(|p| candidates[p]).collect())
}

struct Context<'a> {
    out_dir: &'a Path,
    config: &'a DatasetConfig,
    library: &'a PrimitiveLibrary,
}

fn process_episode(
    source: &EpisodeSource,
    generator: &mut dyn Generator,
    cx: &Context<'_>,
) -> Result<EpisodeRecord, Failure> {
    let fail = |stage: &str, message: String| Failure {
        episode_id: source.episode_id.clone(),
        stage: stage.to_string(),
        message,
    };
    let picked = select_frames(source, cx.config).map_err(|e| fail("frames", e.to_string()))?;
    let images = picked
        .iter()
        .map(|&i| load_image(&source.frames[i].path))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| fail("frames", e.to_string()))?;
    let sheet = contact_sheet(&images).map_err(|e| fail("sheet", e.to_string()))?;
    let sheet_rel = format!("sheets/{}.png", source.episode_id);
    let sheet_path = cx.out_dir.join(&sheet_rel);
    sheet.save(&sheet_path).map_err(|e| fail("sheet", e.to_string()))?;

    let teacher = teacher_loop(
        generator,
        &sheet_path,
        &source.instruction,
        cx.library,
        cx.config.max_retries,
    )
    .map_err(|e| fail("teacher", e.to_string()))?;
    let allowed_actions = derive_allowed_actions(&teacher.bt_xml).map_err(|e| fail("teacher", e.to_string()))?;
    let first = &source.frames[0].path;
    Ok(EpisodeRecord {
        id: source.episode_id.clone(),
        episode_id: source.episode_id.clone(),
        initial_frame: format!(
            "{}/{}",
            source.episode_id,
            first.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
        ),
        contact_sheet: sheet_rel,
        instruction: source.instruction.clone(),
        allowed_actions,
        scene_analysis: teacher.scene_analysis,
        bt_xml: teacher.bt_xml,
        provenance: Provenance::default(),
    })
}

fn augment_structurally(
    base: &[EpisodeRecord],
    config: &DatasetConfig,
    failures: &mut Vec<Failure>,
) -> Vec<EpisodeRecord> {
    let count = plan_counts(base.len(), config).structural;
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "structural")));
    let mut chosen: Vec<usize> = order.into_iter().take(count).collect();
    chosen.sort_unstable();

    let mut out = Vec::new();
    for i in chosen {
        let record = &base[i];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("structural:{}", record.id)));
        let construct = Construct::random(&mut rng);
        let actions = parse_xml(&record.bt_xml).map(|t| main_action_count(&t)).unwrap_or(0);
        let result = if actions == 0 {
            Err("tree has no actions to wrap".to_string())
        } else {
            structural_augment(record, construct, rng.gen_range(0..actions)).map_err(|e| e.to_string())
        };
        match result {
            Ok(r) => out.push(r),
            Err(message) => {
                log::warn!("structural augmentation of {} skipped: {message}", record.id);
                failures.push(Failure {
                    episode_id: record.episode_id.clone(),
                    stage: "structural".into(),
                    message,
                });
            }
        }
    }
    out
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), BuildError> {
    let mut text = serde_json::to_string_pretty(value).expect("records serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), BuildError> {
    let text: String = items
        .iter()
        .map(|i| serde_json::to_string(i).expect("entries serialize") + "\n")
        .collect();
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Runs the whole pipeline over every episode directory under `sources` and
/// writes the record store to `out_dir`. Per-episode failures are logged,
/// recorded in the summary and skipped.
pub fn build_dataset(
    sources: &Path,
    out_dir: &Path,
    config: &DatasetConfig,
    generator: &mut dyn Generator,
    library: &PrimitiveLibrary,
    synonyms: &SynonymMap,
) -> Result<BuildSummary, BuildError> {
    config.check()?;
    let mut dirs: Vec<PathBuf> = fs::read_dir(sources)
        .map_err(|e| io_err(sources, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    for sub in ["records", "sheets"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    }
    let cx = Context {
        out_dir,
        config,
        library,
    };

    let mut failures = Vec::new();
    let mut base = Vec::new();
    for dir in &dirs {
        let result = load_source(dir)
            .map_err(|e| Failure {
                episode_id: dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                stage: "source".into(),
                message: e.to_string(),
            })
            .and_then(|source| process_episode(&source, generator, &cx));
        match result {
            Ok(record) => base.push(record),
            Err(f) => {
                log::warn!("episode {} failed at {}: {}", f.episode_id, f.stage, f.message);
                failures.push(f);
            }
        }
    }
    let failed_episodes = failures.len();

    let structural = augment_structurally(&base, config, &mut failures);
    let structural_count = structural.len();
    let mut records = Vec::with_capacity(base.len() + structural.len());
    for record in base.iter().chain(&structural) {
        let seed = derive_seed(config.seed, &format!("lexical:{}", record.id));
        let record = match lexical_augment(record, config.lexical_probability, seed, synonyms) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("lexical augmentation of {} skipped: {e}", record.id);
                failures.push(Failure {
                    episode_id: record.episode_id.clone(),
                    stage: "lexical".into(),
                    message: e.to_string(),
                });
                record.clone()
            }
        };
        records.push(record);
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));

    let eval_n = plan_counts(
        records.len(),
        &DatasetConfig {
            structural_fraction: 0.0,
            ..config.clone()
        },
    )
    .eval;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "split")));
    let mut is_eval = vec![false; records.len()];
    for &i in order.iter().take(eval_n) {
        is_eval[i] = true;
    }

    let mut manifest = Vec::with_capacity(records.len());
    for (record, eval) in records.iter().zip(&is_eval) {
        let file = format!("records/{}.json", record.id);
        write_json(&out_dir.join(&file), record)?;
        manifest.push(ManifestEntry {
            id: record.id.clone(),
            episode_id: record.episode_id.clone(),
            split: if *eval { Split::Eval } else { Split::Train },
            file,
            structurally_augmented: record.provenance.structurally_augmented,
            lexically_augmented: record.provenance.lexically_augmented,
        });
    }
    write_lines(&out_dir.join("manifest.jsonl"), &manifest)?;
    write_lines(&out_dir.join("failures.jsonl"), &failures)?;

    let summary = BuildSummary {
        episodes: dirs.len(),
        base: base.len(),
        structural: structural_count,
        total: records.len(),
        lexically_augmented: records.iter().filter(|r| r.provenance.lexically_augmented).count(),
        train: records.len() - eval_n,
        eval: eval_n,
        failed_episodes,
        failures,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Reads every record listed in a manifest.
pub fn read_records(out_dir: &Path) -> Result<Vec<EpisodeRecord>, BuildError> {
    let manifest_path = out_dir.join("manifest.jsonl");
    let text = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let entry: ManifestEntry =
                serde_json::from_str(line).map_err(|e| BuildError::Config(format!("manifest: {e}")))?;
            let path = out_dir.join(&entry.file);
            let body = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            serde_json::from_str(&body).map_err(|e| BuildError::Config(format!("{}: {e}", path.display())))
        })
        .collect()
}

//! Frame selection: temporal sub-sampling, a fallback embedder, and greedy
//! farthest-point (k-center) selection.

use std::path::Path;

use image::imageops::FilterType;
use image::DynamicImage;
use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Side length of the grayscale thumbnail the fallback embedder flattens.
pub const EMBED_SIDE: u32 = 16;

/// Keeps every `stride`-th element starting with the first. A stride of 0 is treated as 1.
pub fn subsample<T: Clone>(frames: &[T], stride: usize) -> Vec<T> {
    frames.iter().step_by(stride.max(1)).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Cosine,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
            DistanceMetric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                match (na == 0.0, nb == 0.0) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => 1.0,
                    _ => (1.0 - dot / (na * nb)).max(0.0),
                }
            }
        }
    }
}

/// Greedy k-center selection starting from `seed_index`: each step adds the
/// point whose distance to the chosen set is largest (ties go to the lower
/// index). The chosen indices are returned in ascending (temporal) order.
pub fn kcenter_greedy(
    vectors: &[Vec<f64>],
    k: usize,
    seed_index: usize,
    metric: DistanceMetric,
) -> Result<Vec<usize>, DatasetError> {
    if k > vectors.len() {
        return Err(DatasetError::KTooLarge {
            k,
            available: vectors.len(),
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let dim = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(DatasetError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    if seed_index >= vectors.len() {
        return Err(DatasetError::SeedOutOfRange(seed_index));
    }

    let mut chosen = vec![seed_index];
    let mut selected = vec![false; vectors.len()];
    selected[seed_index] = true;
    let mut min_dist: Vec<f64> = vectors
        .iter()
        .map(|v| metric.distance(v, &vectors[seed_index]))
        .collect();

    while chosen.len() < k {
        let next = (0..vectors.len())
            .filter(|&i| !selected[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if min_dist[b] >= min_dist[i] => Some(b),
                _ => Some(i),
            })
            .expect("k <= n leaves an unselected point");
        selected[next] = true;
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            let d = metric.distance(v, &vectors[next]);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Largest distance from any point to its nearest chosen center.
pub fn coverage_radius(vectors: &[Vec<f64>], centers: &[usize], metric: DistanceMetric) -> f64 {
    vectors
        .iter()
        .map(|v| {
            centers
                .iter()
                .map(|&c| metric.distance(v, &vectors[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Deterministic stand-in embedding: grayscale, resize to 16×16, flatten to
/// [0, 1] intensities, L2-normalize. An all-black image maps to the zero vector.
pub fn fallback_embed(image: &DynamicImage) -> Vec<f64> {
    let thumb = image::imageops::resize(&image.to_luma8(), EMBED_SIDE, EMBED_SIDE, FilterType::Triangle);
    let mut v: Vec<f64> = thumb.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn load_image(path: &Path) -> Result<DynamicImage, DatasetError> {
    image::open(path).map_err(|e| DatasetError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn embed_path(path: &Path) -> Result<Vec<f64>, DatasetError> {
    Ok(fallback_embed(&load_image(path)?))
}

/// Reads an embedding sidecar: one comma-separated row of numbers per frame.
pub fn read_embeddings(path: &Path) -> Result<Vec<Vec<f64>>, DatasetError> {
    let bad = |message: String| DatasetError::Sidecar {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

//! Offline plan-quality metrics and online success aggregation.

pub mod lexical;
mod suite;

use serde::Serialize;

use crate::bt::{extract_action_set, extract_decorator_set, parse_xml, BehaviorTree};
use crate::conformance::extract_xml_block;

pub use lexical::{bleu, corpus_bleu, rouge, tokenize, RougeScores};
pub use suite::{aggregate_suite, SuiteError, SuiteResult};

/// 1 iff both trees use exactly the same set of structural tags.
pub fn struct_match(generated: &BehaviorTree, reference: &BehaviorTree) -> u8 {
    (extract_decorator_set(generated) == extract_decorator_set(reference)) as u8
}

/// Jaccard index of the distinct action primitives of two trees. Two trees
/// without any action score 1.0.
pub fn action_jaccard(generated: &BehaviorTree, reference: &BehaviorTree) -> f64 {
    let a = extract_action_set(generated);
    let b = extract_action_set(reference);
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairScore {
    pub struct_match: u8,
    pub action_jaccard: f64,
    pub bleu: f64,
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
    pub rouge_lsum: f64,
}

/// Scores a raw generated output against a reference tree document.
///
/// A hypothesis that does not parse scores 0 on both structural metrics;
/// lexical metrics are still computed on the extracted XML text.
pub fn score_pair(hypothesis: &str, reference: &BehaviorTree, reference_text: &str) -> PairScore {
    let hyp_xml = extract_xml_block(hypothesis);
    let ref_xml = extract_xml_block(reference_text);
    let (struct_match, action_jaccard) = match parse_xml(hyp_xml) {
        Ok(tree) => (struct_match(&tree, reference), action_jaccard(&tree, reference)),
        Err(_) => (0, 0.0),
    };
    let r = rouge(hyp_xml, ref_xml);
    PairScore {
        struct_match,
        action_jaccard,
        bleu: bleu(&tokenize(hyp_xml), &tokenize(ref_xml)),
        rouge_1: r.rouge_1,
        rouge_2: r.rouge_2,
        rouge_l: r.rouge_l,
        rouge_lsum: r.rouge_lsum,
    }
}

/// Hits over total for one bucket of reference trees (e.g. linear, decorator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub hits: usize,
    pub total: usize,
}

impl Tally {
    pub fn new(hits: usize, total: usize) -> Self {
        Tally { hits, total }
    }
}

/// Pooled percentage over several buckets; `None` when there is nothing to pool.
pub fn pooled_percentage(buckets: &[Tally]) -> Option<f64> {
    let hits: usize = buckets.iter().map(|b| b.hits).sum();
    let total: usize = buckets.iter().map(|b| b.total).sum();
    (total > 0).then(|| 100.0 * hits as f64 / total as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Aggregate view over many [`PairScore`]s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub pairs: usize,
    pub struct_match_pct: f64,
    pub jaccard_mean: f64,
    pub jaccard_std: f64,
    pub bleu: f64,
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
    pub rouge_lsum: f64,
}

pub fn summarize(scores: &[PairScore]) -> Option<ScoreSummary> {
    let n = scores.len();
    if n == 0 {
        return None;
    }
    let mean = |f: fn(&PairScore) -> f64| scores.iter().map(f).sum::<f64>() / n as f64;
    let jaccards: Vec<f64> = scores.iter().map(|s| s.action_jaccard).collect();
    let (jaccard_mean, jaccard_std) = mean_std(&jaccards)?;
    let hits = scores.iter().filter(|s| s.struct_match == 1).count();
    Some(ScoreSummary {
        pairs: n,
        struct_match_pct: pooled_percentage(&[Tally::new(hits, n)])?,
        jaccard_mean,
        jaccard_std,
        bleu: mean(|s| s.bleu),
        rouge_1: mean(|s| s.rouge_1),
        rouge_2: mean(|s| s.rouge_2),
        rouge_l: mean(|s| s.rouge_l),
        rouge_lsum: mean(|s| s.rouge_lsum),
    })
}

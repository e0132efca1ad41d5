//! Lexical overlap scores (BLEU, ROUGE) over XML token streams.
//!
//! Tokenization: whitespace separates tokens and is dropped; each of `<`,
//! `>` and `"` is a token on its own; everything else is kept verbatim
//! (no lowercasing). So `<Action ID="GRASP"/>` becomes
//! `<` `Action` `ID=` `"` `GRASP` `"` `/` `>`.

use std::collections::HashMap;

pub fn tokenize(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        let boundary = c.is_whitespace() || matches!(c, '<' | '>' | '"');
        if boundary {
            if let Some(s) = start.take() {
                tokens.push(&text[s..i]);
            }
            if !c.is_whitespace() {
                tokens.push(&text[i..i + c.len_utf8()]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(&text[s..]);
    }
    tokens
}

pub const MAX_ORDER: usize = 4;

fn ngram_counts<'t, 'a>(tokens: &'t [&'a str], n: usize) -> HashMap<&'t [&'a str], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and hypothesis n-gram total, for n = 1..=4.
fn clipped_matches(hyp: &[&str], reference: &[&str]) -> [(usize, usize); MAX_ORDER] {
    let mut out = [(0, 0); MAX_ORDER];
    for (i, slot) in out.iter_mut().enumerate() {
        let n = i + 1;
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        let matched = h.iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum();
        *slot = (matched, hyp.len().saturating_sub(n - 1));
    }
    out
}

fn bleu_from_counts(counts: &[(usize, usize); MAX_ORDER], hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 || counts[0].0 == 0 {
        return 0.0;
    }
    let smooth = counts[1..].iter().any(|&(m, _)| m == 0);
    let log_sum: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &(m, total))| {
            let p = if i > 0 && smooth {
                (m as f64 + 1.0) / (total as f64 + 1.0)
            } else {
                m as f64 / total as f64
            };
            p.ln()
        })
        .sum();
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    bp * (log_sum / MAX_ORDER as f64).exp()
}

/// Sentence BLEU with uniform weights up to 4-grams and the standard brevity
/// penalty. When any higher-order (n ≥ 2) match count is zero, add-one
/// smoothing is applied to every n ≥ 2 precision. No unigram match, or an
/// empty hypothesis, scores 0.
pub fn bleu(hypothesis: &[&str], reference: &[&str]) -> f64 {
    bleu_from_counts(
        &clipped_matches(hypothesis, reference),
        hypothesis.len(),
        reference.len(),
    )
}

/// Corpus BLEU: n-gram statistics and lengths summed over all pairs first.
pub fn corpus_bleu<'a, I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (&'a [&'a str], &'a [&'a str])>,
{
    let mut total = [(0, 0); MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in pairs {
        for (acc, c) in total.iter_mut().zip(clipped_matches(h, r)) {
            acc.0 += c.0;
            acc.1 += c.1;
        }
        hyp_len += h.len();
        ref_len += r.len();
    }
    bleu_from_counts(&total, hyp_len, ref_len)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RougeScores {
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
    pub rouge_lsum: f64,
}

fn f1(overlap: f64, hyp_total: f64, ref_total: f64) -> f64 {
    if overlap == 0.0 || hyp_total == 0.0 || ref_total == 0.0 {
        return 0.0;
    }
    let p = overlap / hyp_total;
    let r = overlap / ref_total;
    2.0 * p * r / (p + r)
}

fn rouge_n(hyp: &[&str], reference: &[&str], n: usize) -> f64 {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let overlap: usize = h.iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum();
    f1(
        overlap as f64,
        hyp.len().saturating_sub(n - 1) as f64,
        reference.len().saturating_sub(n - 1) as f64,
    )
}

fn lcs_table(a: &[&str], b: &[&str]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t
}

pub fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// Indices into `reference` of one LCS between `reference` and `hyp`.
fn lcs_ref_indices(reference: &[&str], hyp: &[&str]) -> Vec<usize> {
    let t = lcs_table(reference, hyp);
    let (mut i, mut j) = (reference.len(), hyp.len());
    let mut out = Vec::new();
    while i > 0 && j > 0 {
        if reference[i - 1] == hyp[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if t[i - 1][j] >= t[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Summary-level LCS: for each reference line, the union of its LCS hits
/// against every hypothesis line, with each token's hits clipped by its
/// remaining count in hypothesis and reference.
fn rouge_lsum(hyp_lines: &[Vec<&str>], ref_lines: &[Vec<&str>]) -> f64 {
    let hyp_total: usize = hyp_lines.iter().map(Vec::len).sum();
    let ref_total: usize = ref_lines.iter().map(Vec::len).sum();
    let mut hyp_budget: HashMap<&str, usize> = HashMap::new();
    for t in hyp_lines.iter().flatten() {
        *hyp_budget.entry(t).or_insert(0) += 1;
    }
    let mut ref_budget: HashMap<&str, usize> = HashMap::new();
    for t in ref_lines.iter().flatten() {
        *ref_budget.entry(t).or_insert(0) += 1;
    }
    let mut hits = 0usize;
    for r in ref_lines {
        let mut union: Vec<usize> = hyp_lines.iter().flat_map(|h| lcs_ref_indices(r, h)).collect();
        union.sort_unstable();
        union.dedup();
        for idx in union {
            let tok = r[idx];
            let (hb, rb) = (
                hyp_budget.get(tok).copied().unwrap_or(0),
                ref_budget.get(tok).copied().unwrap_or(0),
            );
            if hb > 0 && rb > 0 {
                hits += 1;
                hyp_budget.insert(tok, hb - 1);
                ref_budget.insert(tok, rb - 1);
            }
        }
    }
    f1(hits as f64, hyp_total as f64, ref_total as f64)
}

fn token_lines(text: &str) -> Vec<Vec<&str>> {
    text.lines().map(tokenize).filter(|l| !l.is_empty()).collect()
}

/// ROUGE-1/2/L/Lsum F1 between two texts. Lsum splits both texts on line
/// boundaries. Two empty texts score 1.0 on every variant.
pub fn rouge(hypothesis: &str, reference: &str) -> RougeScores {
    let hyp = tokenize(hypothesis);
    let reference_tokens = tokenize(reference);
    if hyp.is_empty() && reference_tokens.is_empty() {
        return RougeScores {
            rouge_1: 1.0,
            rouge_2: 1.0,
            rouge_l: 1.0,
            rouge_lsum: 1.0,
        };
    }
    RougeScores {
        rouge_1: rouge_n(&hyp, &reference_tokens, 1),
        rouge_2: rouge_n(&hyp, &reference_tokens, 2),
        rouge_l: f1(
            lcs_len(&hyp, &reference_tokens) as f64,
            hyp.len() as f64,
            reference_tokens.len() as f64,
        ),
        rouge_lsum: rouge_lsum(&token_lines(hypothesis), &token_lines(reference)),
    }
}

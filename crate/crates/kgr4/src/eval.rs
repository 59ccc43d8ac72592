//! Candidate selection (rethink) and evaluation metrics: concept coverage,
//! corpus BLEU-4, repeated-ngram rate, unknown-word rate, and difficulty
//! bucketing of concept sets against a concept co-occurrence graph.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::corpus::ConceptSet;
use crate::error::{Kgr4Error, Result};
use crate::text::Sentence;

/// One generation candidate plus the relevance score assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub sentence: Sentence,
    /// edit/copy mixing weight the candidate was generated with
    pub lambda: f64,
    pub score: f64,
}

/// Pick the highest-scoring candidate. Ties go to the lower lambda, then the
/// earlier candidate.
pub fn rethink_select(candidates: &[ScoredCandidate]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Kgr4Error::EmptyCandidates);
    }
    let mut best = 0usize;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        if c.score > b.score || (c.score == b.score && c.lambda < b.lambda) {
            best = i;
        }
    }
    Ok(best)
}

/// Percentage of concepts whose lemma appears among the sentence's lemmas.
pub fn coverage(concepts: &ConceptSet, sentence: &Sentence) -> f64 {
    let lemmas: BTreeSet<&str> = sentence.lemmas.iter().map(|s| s.as_str()).collect();
    let total = concepts.iter().count();
    let matched = concepts.iter().filter(|c| lemmas.contains(c)).count();
    100.0 * matched as f64 / total as f64
}

fn has_repeated_ngram(tokens: &[String], n: usize) -> bool {
    if tokens.len() < 2 * n {
        return false;
    }
    let mut seen = BTreeSet::new();
    for window in tokens.windows(n) {
        if !seen.insert(window) {
            return true;
        }
    }
    false
}

/// Percentage of sentences containing at least one repeated n-gram.
pub fn rep_ngram(sentences: &[Sentence], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Kgr4Error::InvalidArgument("n must be >= 1".into()));
    }
    if sentences.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    let hits = sentences
        .iter()
        .filter(|s| has_repeated_ngram(&s.tokens, n))
        .count();
    Ok(100.0 * hits as f64 / sentences.len() as f64)
}

/// Percentage of sentences containing a token outside the reference word set
/// (comparison is case-folded on both sides).
pub fn unk_words(sentences: &[Sentence], known: &BTreeSet<String>) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    let folded: BTreeSet<String> = known.iter().map(|w| w.to_lowercase()).collect();
    let hits = sentences
        .iter()
        .filter(|s| s.tokens.iter().any(|t| !folded.contains(&t.to_lowercase())))
        .count();
    Ok(100.0 * hits as f64 / sentences.len() as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts: BTreeMap<&[String], usize> = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-4: geometric mean of clipped 1..4-gram precisions with a
/// brevity penalty against the closest reference length. Unsmoothed, so any
/// empty precision level zeroes the score.
pub fn bleu4(hypotheses: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    if hypotheses.is_empty() || hypotheses.len() != references.len() {
        return Err(Kgr4Error::InvalidArgument(format!(
            "need equal nonzero hypothesis/reference counts, got {}/{}",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, refs) in hypotheses.iter().zip(references) {
        if refs.is_empty() {
            return Err(Kgr4Error::InvalidArgument(
                "every hypothesis needs at least one reference".into(),
            ));
        }
        hyp_len += hyp.len();
        // closest reference length, ties to the shorter
        let closest = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(hyp.len()), l))
            .unwrap();
        ref_len += closest;
        for n in 1..=4usize {
            let hyp_counts = ngram_counts(hyp, n);
            let mut max_ref: BTreeMap<&[String], usize> = BTreeMap::new();
            for r in refs {
                for (gram, c) in ngram_counts(r, n) {
                    let entry = max_ref.entry(gram).or_insert(0);
                    *entry = (*entry).max(c);
                }
            }
            for (gram, c) in hyp_counts {
                total[n - 1] += c;
                matched[n - 1] += c.min(*max_ref.get(gram).unwrap_or(&0));
            }
        }
    }
    let mut log_precision_sum = 0.0f64;
    for n in 0..4 {
        if total[n] == 0 || matched[n] == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (matched[n] as f64 / total[n] as f64).ln();
    }
    let bp = if hyp_len >= ref_len || hyp_len == 0 {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * (log_precision_sum / 4.0).exp())
}

pub type ConceptGraph = BTreeSet<(String, String)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Hard,
    Normal,
    Easy,
}

impl Difficulty {
    pub fn label(self) -> &'static str {
        match self {
            Difficulty::Hard => "hard",
            Difficulty::Normal => "normal",
            Difficulty::Easy => "easy",
        }
    }
}

/// Number of concept pairs (out of the 10 pairs in a 5-concept set) connected
/// in the co-occurrence graph.
pub fn connected_pairs(concepts: &ConceptSet, graph: &ConceptGraph) -> Result<usize> {
    let items: Vec<&str> = concepts.iter().collect();
    if items.len() != 5 {
        return Err(Kgr4Error::InvalidArgument(format!(
            "difficulty bucketing is defined for 5-concept sets, got {}",
            items.len()
        )));
    }
    let mut connected = 0usize;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let (a, b) = if items[i] <= items[j] {
                (items[i], items[j])
            } else {
                (items[j], items[i])
            };
            if graph.contains(&(a.to_string(), b.to_string())) {
                connected += 1;
            }
        }
    }
    Ok(connected)
}

/// Bucket a 5-concept set by graph connectivity: 0-2 connected pairs is hard,
/// 3-5 normal, 6-10 easy.
pub fn difficulty_bucket(concepts: &ConceptSet, graph: &ConceptGraph) -> Result<Difficulty> {
    let connected = connected_pairs(concepts, graph)?;
    Ok(match connected {
        0..=2 => Difficulty::Hard,
        3..=5 => Difficulty::Normal,
        _ => Difficulty::Easy,
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BucketStats {
    pub count: usize,
    pub bleu4: f64,
    pub coverage: f64,
}

/// Aggregate evaluation results for one prediction set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub bleu4: f64,
    pub coverage: f64,
    pub rep_2gram: f64,
    pub unk_words: f64,
    /// per-difficulty breakdown, present when a concept graph was supplied
    /// and the concept sets have 5 concepts
    pub buckets: BTreeMap<String, BucketStats>,
    /// scores computed outside this library (e.g. learned metrics), keyed by
    /// metric name
    pub external: BTreeMap<String, f64>,
}

pub struct EvalInput<'a> {
    pub concepts: &'a ConceptSet,
    pub prediction: &'a Sentence,
    pub references: Vec<&'a Sentence>,
}

pub fn evaluate(
    inputs: &[EvalInput<'_>],
    known_words: &BTreeSet<String>,
    graph: Option<&ConceptGraph>,
) -> Result<EvalReport> {
    if inputs.is_empty() {
        return Err(Kgr4Error::EmptyDataset);
    }
    let hyps: Vec<Vec<String>> = inputs.iter().map(|i| i.prediction.tokens.clone()).collect();
    let refs: Vec<Vec<Vec<String>>> = inputs
        .iter()
        .map(|i| i.references.iter().map(|r| r.tokens.clone()).collect())
        .collect();
    let sentences: Vec<Sentence> = inputs.iter().map(|i| i.prediction.clone()).collect();
    let mean_cov = inputs
        .iter()
        .map(|i| coverage(i.concepts, i.prediction))
        .sum::<f64>()
        / inputs.len() as f64;
    let mut buckets = BTreeMap::new();
    if let Some(graph) = graph {
        let mut grouped: BTreeMap<Difficulty, Vec<usize>> = BTreeMap::new();
        for (idx, input) in inputs.iter().enumerate() {
            if input.concepts.iter().count() == 5 {
                grouped
                    .entry(difficulty_bucket(input.concepts, graph)?)
                    .or_default()
                    .push(idx);
            }
        }
        for (bucket, indices) in grouped {
            let h: Vec<Vec<String>> = indices.iter().map(|&i| hyps[i].clone()).collect();
            let r: Vec<Vec<Vec<String>>> = indices.iter().map(|&i| refs[i].clone()).collect();
            let cov = indices
                .iter()
                .map(|&i| coverage(inputs[i].concepts, inputs[i].prediction))
                .sum::<f64>()
                / indices.len() as f64;
            buckets.insert(
                bucket.label().to_string(),
                BucketStats {
                    count: indices.len(),
                    bleu4: bleu4(&h, &r)?,
                    coverage: cov,
                },
            );
        }
    }
    Ok(EvalReport {
        n: inputs.len(),
        bleu4: bleu4(&hyps, &refs)?,
        coverage: mean_cov,
        rep_2gram: rep_ngram(&sentences, 2)?,
        unk_words: unk_words(&sentences, known_words)?,
        buckets,
        external: BTreeMap::new(),
    })
}

impl EvalReport {
    pub fn with_external(mut self, name: &str, value: f64) -> EvalReport {
        self.external.insert(name.to_string(), value);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width text table, one metric per row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>10}", "metric", "value");
        let _ = writeln!(out, "{:<18} {:>10}", "examples", self.n);
        let _ = writeln!(out, "{:<18} {:>10.2}", "bleu4", self.bleu4);
        let _ = writeln!(out, "{:<18} {:>10.2}", "coverage", self.coverage);
        let _ = writeln!(out, "{:<18} {:>10.2}", "rep_2gram", self.rep_2gram);
        let _ = writeln!(out, "{:<18} {:>10.2}", "unk_words", self.unk_words);
        for (name, value) in &self.external {
            let _ = writeln!(out, "{:<18} {:>10.4}", name, value);
        }
        for (bucket, stats) in &self.buckets {
            let _ = writeln!(
                out,
                "{:<18} {:>10.2}",
                format!("bleu4[{bucket}]"),
                stats.bleu4
            );
        }
        out
    }

    /// Difficulty-bucket breakdown as CSV.
    pub fn buckets_csv(&self) -> String {
        let mut out = String::from("bucket,count,bleu4,coverage\n");
        for (bucket, stats) in &self.buckets {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4}",
                bucket, stats.count, stats.bleu4, stats.coverage
            );
        }
        out
    }
}

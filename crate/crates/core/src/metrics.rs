//! Answer and retrieval quality metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nli::{judge_sentences, RewardWeights, Verifier};

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1 when the normalized prediction equals any normalized gold answer.
pub fn exact_match(pred: &str, golds: &[String]) -> f64 {
    let p = normalize_answer(pred);
    if golds.iter().any(|g| normalize_answer(g) == p) {
        1.0
    } else {
        0.0
    }
}

fn token_f1(pred: &str, gold: &str) -> f64 {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let p_toks: Vec<&str> = p.split_whitespace().collect();
    let g_toks: Vec<&str> = g.split_whitespace().collect();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g_toks {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &p_toks {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / p_toks.len() as f64;
    let recall = overlap as f64 / g_toks.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Multiset token-overlap F1, best over the gold answers.
pub fn f1_score(pred: &str, golds: &[String]) -> f64 {
    golds.iter().map(|g| token_f1(pred, g)).fold(0.0, f64::max)
}

/// Fraction of gold passages among the first five selected ids.
/// `selected` must already be ordered by descending fusion score.
pub fn recall_at_5(selected: &[String], gold: &[String]) -> f64 {
    let mut gold: Vec<&String> = gold.iter().collect();
    gold.sort();
    gold.dedup();
    if gold.is_empty() {
        return 0.0;
    }
    let top = &selected[..selected.len().min(5)];
    let hits = gold.iter().filter(|g| top.contains(g)).count();
    hits as f64 / gold.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Faithfulness {
    /// Share of answer sentences whose best verdict is entailment-dominant.
    pub ap: f64,
    /// Share whose best verdict is contradiction-dominant.
    pub cr: f64,
}

/// Sentence-level attribution precision and contradiction rate. The best
/// verdict per sentence is the one maximizing the weighted reward.
pub fn faithfulness_metrics(
    answer: &str,
    evidence: &[String],
    weights: &RewardWeights,
    verifier: &dyn Verifier,
) -> Result<Faithfulness> {
    let judged = judge_sentences(answer, evidence, weights, verifier)?;
    if judged.is_empty() {
        return Ok(Faithfulness { ap: 0.0, cr: 0.0 });
    }
    let n = judged.len() as f64;
    let ent = judged.iter().filter(|j| j.verdict.entail_dominant()).count() as f64;
    let con = judged.iter().filter(|j| j.verdict.contradict_dominant()).count() as f64;
    Ok(Faithfulness { ap: ent / n, cr: con / n })
}

//! Sentence-level entailment reward.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::remote::OracleError;

const SUM_TOLERANCE: f64 = 1e-6;

/// Probability triple from a verifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub p_ent: f64,
    pub p_neu: f64,
    pub p_con: f64,
}

impl NliVerdict {
    pub fn new(p_ent: f64, p_neu: f64, p_con: f64) -> Result<Self, OracleError> {
        let v = Self { p_ent, p_neu, p_con };
        v.check()?;
        Ok(v)
    }

    pub fn check(&self) -> Result<(), OracleError> {
        let ps = [self.p_ent, self.p_neu, self.p_con];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(OracleError::InvariantViolation(format!(
                "probabilities outside [0, 1]: {ps:?}"
            )));
        }
        let sum: f64 = ps.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(OracleError::InvariantViolation(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Entailment strictly exceeds both other probabilities.
    pub fn entail_dominant(&self) -> bool {
        self.p_ent > self.p_neu && self.p_ent > self.p_con
    }

    pub fn contradict_dominant(&self) -> bool {
        self.p_con > self.p_ent && self.p_con > self.p_neu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_ent: f64,
    pub w_neu: f64,
    pub w_con: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { w_ent: 1.0, w_neu: -0.2, w_con: -2.0 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if self.w_con.is_nan() || self.w_con >= 0.0 {
            return Err(Error::Validation(format!(
                "contradiction weight must be negative, got {}",
                self.w_con
            )));
        }
        Ok(())
    }

    pub fn score(&self, v: &NliVerdict) -> f64 {
        self.w_ent * v.p_ent + self.w_neu * v.p_neu + self.w_con * v.p_con
    }

    pub fn min(&self) -> f64 {
        self.w_ent.min(self.w_neu).min(self.w_con)
    }

    pub fn max(&self) -> f64 {
        self.w_ent.max(self.w_neu).max(self.w_con)
    }
}

/// Premise/hypothesis entailment oracle. Implementations must be pure
/// functions of their two inputs.
pub trait Verifier {
    fn verify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, OracleError>;
}

impl<V: Verifier + ?Sized> Verifier for &V {
    fn verify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, OracleError> {
        (**self).verify(premise, hypothesis)
    }
}

/// Lexical stand-in verifier.
///
/// A hypothesis whose tokens all occur in the premise is entailed. If both
/// carry numbers and the number sets are disjoint it is contradicted.
/// Anything else is neutral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockNli {
    pub entailed: NliVerdict,
    pub contradicted: NliVerdict,
    pub neutral: NliVerdict,
}

impl Default for MockNli {
    fn default() -> Self {
        Self {
            entailed: NliVerdict { p_ent: 0.9, p_neu: 0.1, p_con: 0.0 },
            contradicted: NliVerdict { p_ent: 0.0, p_neu: 0.1, p_con: 0.9 },
            neutral: NliVerdict { p_ent: 0.1, p_neu: 0.8, p_con: 0.1 },
        }
    }
}

impl MockNli {
    /// Same rules, one-hot verdicts.
    pub fn crisp() -> Self {
        Self {
            entailed: NliVerdict { p_ent: 1.0, p_neu: 0.0, p_con: 0.0 },
            contradicted: NliVerdict { p_ent: 0.0, p_neu: 0.0, p_con: 1.0 },
            neutral: NliVerdict { p_ent: 0.0, p_neu: 1.0, p_con: 0.0 },
        }
    }

    pub fn judge(&self, premise: &str, hypothesis: &str) -> NliVerdict {
        let p = token_set(premise);
        let h = token_set(hypothesis);
        if h.is_subset(&p) {
            return self.entailed;
        }
        let pn: HashSet<&String> = p.iter().filter(|t| is_numeric(t)).collect();
        let hn: HashSet<&String> = h.iter().filter(|t| is_numeric(t)).collect();
        if !pn.is_empty() && !hn.is_empty() && pn.is_disjoint(&hn) {
            return self.contradicted;
        }
        self.neutral
    }
}

impl Verifier for MockNli {
    fn verify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, OracleError> {
        Ok(self.judge(premise, hypothesis))
    }
}

/// Lowercased whitespace tokens with leading/trailing punctuation removed.
fn token_set(text: &str) -> HashSet<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn is_numeric(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_digit())
        && token.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

/// Splits after '.', '?' or '!' when followed by whitespace or the end of
/// the text. Pieces are trimmed and empties dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '?' | '!') {
            let boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if boundary {
                let end = i + c.len_utf8();
                push_trimmed(&mut out, &text[start..end]);
                start = end;
            }
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let t = piece.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

/// Per-sentence best verdict: the evidence verdict maximizing `Wᵀp`
/// (first evidence wins ties), together with that score.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceJudgement {
    pub sentence: String,
    pub verdict: NliVerdict,
    pub score: f64,
}

pub fn judge_sentences(
    answer: &str,
    evidence: &[String],
    weights: &RewardWeights,
    verifier: &dyn Verifier,
) -> Result<Vec<SentenceJudgement>> {
    if evidence.is_empty() {
        return Err(Error::InvalidArgument("evidence set is empty".into()));
    }
    let mut out = Vec::new();
    for sentence in split_sentences(answer) {
        let mut best: Option<(NliVerdict, f64)> = None;
        for e in evidence {
            let v = verifier.verify(e, &sentence)?;
            v.check()?;
            let s = weights.score(&v);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((v, s));
            }
        }
        let (verdict, score) = best.expect("evidence is non-empty");
        out.push(SentenceJudgement { sentence, verdict, score });
    }
    Ok(out)
}

/// Mean over answer sentences of the best weighted verdict over the
/// evidence. An answer with no sentences scores 0.
pub fn compute_reward(
    answer: &str,
    evidence: &[String],
    weights: &RewardWeights,
    verifier: &dyn Verifier,
) -> Result<f64> {
    let judged = judge_sentences(answer, evidence, weights, verifier)?;
    if judged.is_empty() {
        return Ok(0.0);
    }
    Ok(judged.iter().map(|j| j.score).sum::<f64>() / judged.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(NliVerdict);
    impl Verifier for Fixed {
        fn verify(&self, _: &str, _: &str) -> Result<NliVerdict, OracleError> {
            Ok(self.0)
        }
    }

    struct Broken;
    impl Verifier for Broken {
        fn verify(&self, _: &str, _: &str) -> Result<NliVerdict, OracleError> {
            Err(OracleError::Unavailable("down".into()))
        }
    }

    fn ev(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(split_sentences("A. B."), vec!["A.", "B."]);
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("Mr. X won"), vec!["Mr.", "X won"]);
        assert_eq!(split_sentences("no terminator here"), vec!["no terminator here"]);
        assert_eq!(split_sentences("Pi is 3.14 roughly! Yes?"), vec!["Pi is 3.14 roughly!", "Yes?"]);
    }

    #[test]
    fn mock_rules() {
        let m = MockNli::default();
        assert_eq!(m.judge("founded in 1995 by X", "founded in 1995"), NliVerdict::new(0.9, 0.1, 0.0).unwrap());
        assert_eq!(m.judge("founded in 1995", "founded in 1955"), NliVerdict::new(0.0, 0.1, 0.9).unwrap());
        assert_eq!(m.judge("the sky is blue", "cats sleep"), NliVerdict::new(0.1, 0.8, 0.1).unwrap());
        // trailing punctuation does not break containment
        assert!(m.judge("It opened in 1995.", "It opened in 1995.").entail_dominant());
    }

    #[test]
    fn reward_golden_values() {
        let w = RewardWeights::default();
        let e = ev(&["evidence"]);
        let r = |p: (f64, f64, f64)| {
            compute_reward("One sentence.", &e, &w, &Fixed(NliVerdict::new(p.0, p.1, p.2).unwrap())).unwrap()
        };
        assert!((r((1.0, 0.0, 0.0)) - 1.0).abs() < 1e-12);
        assert!((r((0.0, 0.0, 1.0)) + 2.0).abs() < 1e-12);
        assert!((r((0.5, 0.3, 0.2)) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn empty_answer_is_neutral() {
        let w = RewardWeights::default();
        assert_eq!(compute_reward("", &ev(&["x"]), &w, &MockNli::default()).unwrap(), 0.0);
    }

    #[test]
    fn empty_evidence_rejected() {
        let w = RewardWeights::default();
        assert!(compute_reward("a.", &[], &w, &MockNli::default()).is_err());
    }

    #[test]
    fn oracle_failure_is_an_error_not_a_low_reward() {
        let w = RewardWeights::default();
        let err = compute_reward("a.", &ev(&["x"]), &w, &Broken).unwrap_err();
        assert!(matches!(err, Error::Oracle(OracleError::Unavailable(_))));
    }

    #[test]
    fn invalid_verdicts_rejected() {
        assert!(NliVerdict::new(0.6, 0.3, 0.3).is_err());
        assert!(NliVerdict::new(-0.1, 0.6, 0.5).is_err());
    }

    #[test]
    fn mock_entailed_through_weights() {
        let w = RewardWeights::default();
        let r = compute_reward("founded in 1995.", &ev(&["It was founded in 1995 by X."]), &w, &MockNli::default())
            .unwrap();
        assert!((r - 0.88).abs() < 1e-12);
    }

    #[test]
    fn weights_must_penalize_contradiction() {
        assert!(RewardWeights { w_ent: 1.0, w_neu: 0.0, w_con: 0.0 }.validate().is_err());
        RewardWeights::default().validate().unwrap();
    }
}

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::PlannerState;
use crate::corpus::ChunkStore;
use crate::error::{Error, Result};
use crate::nli::split_sentences;
use crate::remote::OracleError;

/// One candidate continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub text: String,
    pub prior: f64,
    /// The answer is complete after this continuation.
    #[serde(default)]
    pub terminal: bool,
}

/// Source of candidate continuations with prior probabilities.
///
/// `propose` returns at most `k` proposals (exactly `k` whenever that many
/// exist) whose priors sum to 1, and must be deterministic given the rng
/// state. An empty result means the state cannot be continued.
pub trait PolicyOracle {
    fn propose(
        &self,
        state: &PlannerState,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Proposal>, OracleError>;
}

/// Scales priors to sum to one; non-positive totals become uniform.
pub fn normalize_priors(proposals: &mut [Proposal]) {
    let total: f64 = proposals.iter().map(|p| p.prior.max(0.0)).sum();
    let n = proposals.len() as f64;
    for p in proposals.iter_mut() {
        p.prior = if total > 0.0 { p.prior.max(0.0) / total } else { 1.0 / n };
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureLine {
    state_key: String,
    proposals: Vec<Proposal>,
}

/// Policy replaying proposals from a fixture keyed by the partial answer.
///
/// When a key has more than `k` proposals, `k` are drawn without
/// replacement with probability proportional to prior and returned in
/// fixture order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPolicy {
    table: HashMap<String, Vec<Proposal>>,
}

impl ScriptedPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, state_key: impl Into<String>, proposals: Vec<Proposal>) {
        self.table.insert(state_key.into(), proposals);
    }

    pub fn with(mut self, state_key: impl Into<String>, proposals: Vec<Proposal>) -> Self {
        self.insert(state_key, proposals);
        self
    }

    pub fn parse(contents: &str) -> Result<Self> {
        let mut policy = Self::new();
        for (lineno, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            if rec.proposals.iter().any(|p| p.text.is_empty()) {
                return Err(Error::Validation(format!(
                    "line {}: proposal with empty text",
                    lineno + 1
                )));
            }
            policy.insert(rec.state_key, rec.proposals);
        }
        Ok(policy)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&contents)
    }
}

impl PolicyOracle for ScriptedPolicy {
    fn propose(
        &self,
        state: &PlannerState,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Proposal>, OracleError> {
        let Some(all) = self.table.get(&state.partial_answer) else {
            return Ok(Vec::new());
        };
        let mut chosen: Vec<usize> = if all.len() <= k {
            (0..all.len()).collect()
        } else {
            sample_by_prior(all, k, rng)
        };
        chosen.sort_unstable();
        let mut out: Vec<Proposal> = chosen.into_iter().map(|i| all[i].clone()).collect();
        normalize_priors(&mut out);
        Ok(out)
    }
}

fn sample_by_prior(all: &[Proposal], k: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    let mut left: Vec<usize> = (0..all.len()).collect();
    let mut chosen = Vec::with_capacity(k);
    while chosen.len() < k && !left.is_empty() {
        let total: f64 = left.iter().map(|&i| all[i].prior.max(0.0)).sum();
        let pos = if total > 0.0 {
            let mut x = rng.gen_range(0.0..total);
            let mut pos = left.len() - 1;
            for (p, &i) in left.iter().enumerate() {
                let w = all[i].prior.max(0.0);
                if x < w {
                    pos = p;
                    break;
                }
                x -= w;
            }
            pos
        } else {
            rng.gen_range(0..left.len())
        };
        chosen.push(left.remove(pos));
    }
    chosen
}

/// Model-free policy for offline runs: proposes sentences lifted from the
/// current context, ranked by word overlap with the query. Each proposal
/// is a complete answer. Questions are never proposed.
pub struct ExtractivePolicy<'a> {
    store: &'a ChunkStore,
}

impl<'a> ExtractivePolicy<'a> {
    pub fn new(store: &'a ChunkStore) -> Self {
        Self { store }
    }
}

fn words(text: &str) -> BTreeSet<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| t.len() > 2)
        .collect()
}

impl PolicyOracle for ExtractivePolicy<'_> {
    fn propose(
        &self,
        state: &PlannerState,
        k: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<Vec<Proposal>, OracleError> {
        let query = words(&state.query);
        let mut seen = BTreeSet::new();
        let mut scored: Vec<(usize, String)> = Vec::new();
        for id in &state.context_ids {
            let Some(chunk) = self.store.get(id) else { continue };
            for s in split_sentences(&chunk.text) {
                if s.ends_with('?') {
                    continue;
                }
                if seen.insert(s.clone()) && !state.partial_answer.contains(&s) {
                    let overlap = words(&s).intersection(&query).count();
                    scored.push((overlap, s));
                }
            }
        }
        // stable: equal overlaps keep context order
        scored.sort_by_key(|s| std::cmp::Reverse(s.0));
        scored.truncate(k);
        let mut out: Vec<Proposal> = scored
            .into_iter()
            .map(|(o, text)| Proposal { text, prior: o as f64 + 1.0, terminal: true })
            .collect();
        normalize_priors(&mut out);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(partial: &str) -> PlannerState {
        PlannerState::new("q", BTreeSet::new()).with_answer(partial)
    }

    #[test]
    fn fixture_round_trip_keeps_order() {
        let src = r#"{"state_key":"","proposals":[{"text":"first","prior":0.5},{"text":"second","prior":0.3},{"text":"third","prior":0.2,"terminal":true}]}"#;
        let p = ScriptedPolicy::parse(src).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = p.propose(&state(""), 3, &mut rng).unwrap();
        let texts: Vec<&str> = out.iter().map(|p| p.text.as_str()).collect();
        assert_eq!(texts, vec!["first", "second", "third"]);
        assert!(out[2].terminal);
        assert!((out.iter().map(|p| p.prior).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_has_no_proposals() {
        let p = ScriptedPolicy::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(p.propose(&state("nope"), 3, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn subsampling_is_seeded() {
        let props: Vec<Proposal> = (0..6)
            .map(|i| Proposal { text: format!("p{i}"), prior: 1.0 + i as f64, terminal: true })
            .collect();
        let p = ScriptedPolicy::new().with("", props);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            p.propose(&state(""), 3, &mut rng).unwrap()
        };
        assert_eq!(draw(5), draw(5));
        assert_eq!(draw(5).len(), 3);
    }

    #[test]
    fn malformed_fixture_names_line() {
        let src = "{\"state_key\":\"\",\"proposals\":[]}\n{oops}";
        assert!(matches!(ScriptedPolicy::parse(src), Err(Error::Parse { line: 2, .. })));
    }
}

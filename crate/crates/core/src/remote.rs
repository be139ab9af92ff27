//! HTTP clients binding remote embedding, generation and entailment services
//! to the oracle traits.
//!
//! Every call is a single JSON POST with a timeout and one retry on
//! transport failure. Responses are checked before use: verdict
//! probabilities must sum to one, embeddings must have the configured
//! dimension, proposals must carry text and finite priors.

use std::time::Duration;

use rand::RngCore;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::Embedder;
use crate::mcts::{normalize_priors, PlannerState, PolicyOracle, Proposal};
use crate::nli::{NliVerdict, Verifier};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle timed out: {0}")]
    Timeout(String),
    #[error("oracle unreachable: {0}")]
    Unavailable(String),
    #[error("malformed oracle response: {0}")]
    Malformed(String),
    #[error("oracle response violates invariant: {0}")]
    InvariantViolation(String),
}

impl OracleError {
    fn retryable(&self) -> bool {
        matches!(self, Self::Timeout(_) | Self::Unavailable(_))
    }
}

#[derive(Debug, Clone)]
pub struct RemoteClient {
    endpoint: String,
    agent: ureq::Agent,
    retries: u32,
}

impl RemoteClient {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { endpoint: endpoint.into(), agent, retries: 1 }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Posts `request` and returns the decoded JSON body.
    pub fn call(&self, request: &Value) -> Result<Value, OracleError> {
        let mut attempt = 0;
        loop {
            match self.call_once(request) {
                Err(e) if e.retryable() && attempt < self.retries => attempt += 1,
                other => return other,
            }
        }
    }

    fn call_once(&self, request: &Value) -> Result<Value, OracleError> {
        let resp = self
            .agent
            .post(&self.endpoint)
            .send_json(request.clone())
            .map_err(|e| classify(&self.endpoint, e))?;
        resp.into_json::<Value>().map_err(|e| {
            if is_timeout(&e) {
                OracleError::Timeout(format!("{}: {e}", self.endpoint))
            } else {
                OracleError::Malformed(format!("{}: {e}", self.endpoint))
            }
        })
    }
}

fn is_timeout(e: &(dyn std::error::Error + 'static)) -> bool {
    let mut cur: Option<&(dyn std::error::Error + 'static)> = Some(e);
    while let Some(err) = cur {
        if let Some(io) = err.downcast_ref::<std::io::Error>() {
            if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) {
                return true;
            }
        }
        cur = err.source();
    }
    false
}

fn classify(endpoint: &str, e: ureq::Error) -> OracleError {
    match e {
        ureq::Error::Status(code, _) if code >= 500 => {
            OracleError::Unavailable(format!("{endpoint}: HTTP {code}"))
        }
        ureq::Error::Status(code, _) => OracleError::Malformed(format!("{endpoint}: HTTP {code}")),
        ureq::Error::Transport(t) => {
            if is_timeout(&t) {
                OracleError::Timeout(format!("{endpoint}: {t}"))
            } else {
                OracleError::Unavailable(format!("{endpoint}: {t}"))
            }
        }
    }
}

fn decode<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, OracleError> {
    serde_json::from_value(v).map_err(|e| OracleError::Malformed(e.to_string()))
}

#[derive(Deserialize)]
struct VerdictWire {
    entail: f64,
    neutral: f64,
    contradict: f64,
}

/// `{"premise", "hypothesis"}` → `{"entail", "neutral", "contradict"}`.
#[derive(Debug, Clone)]
pub struct RemoteVerifier {
    client: RemoteClient,
}

impl RemoteVerifier {
    pub fn new(client: RemoteClient) -> Self {
        Self { client }
    }
}

impl Verifier for RemoteVerifier {
    fn verify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, OracleError> {
        let body = self.client.call(&json!({ "premise": premise, "hypothesis": hypothesis }))?;
        let w: VerdictWire = decode(body)?;
        NliVerdict::new(w.entail, w.neutral, w.contradict)
    }
}

#[derive(Deserialize)]
struct EmbeddingWire {
    embedding: Vec<f64>,
}

/// `{"text"}` → `{"embedding": [float]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    client: RemoteClient,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(client: RemoteClient, dim: usize) -> Self {
        Self { client, dim }
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, OracleError> {
        let w: EmbeddingWire = decode(self.client.call(&json!({ "text": text }))?)?;
        if w.embedding.len() != self.dim {
            return Err(OracleError::InvariantViolation(format!(
                "embedding has dimension {}, expected {}",
                w.embedding.len(),
                self.dim
            )));
        }
        if w.embedding.iter().any(|x| !x.is_finite()) {
            return Err(OracleError::InvariantViolation("embedding has non-finite entries".into()));
        }
        let norm = w.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(OracleError::InvariantViolation("embedding is all zeros".into()));
        }
        Ok(w.embedding.iter().map(|x| x / norm).collect())
    }
}

#[derive(Deserialize)]
struct ProposalsWire {
    proposals: Vec<Proposal>,
}

/// `{"state", "k"}` → `{"proposals": [{"text", "prior", "terminal"}]}`.
#[derive(Debug, Clone)]
pub struct RemotePolicy {
    client: RemoteClient,
}

impl RemotePolicy {
    pub fn new(client: RemoteClient) -> Self {
        Self { client }
    }
}

impl PolicyOracle for RemotePolicy {
    fn propose(
        &self,
        state: &PlannerState,
        k: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<Vec<Proposal>, OracleError> {
        let req = json!({
            "state": {
                "query": state.query,
                "context_ids": state.context_ids,
                "partial_answer": state.partial_answer,
                "depth": state.depth,
            },
            "k": k,
        });
        let mut w: ProposalsWire = decode(self.client.call(&req)?)?;
        if let Some(p) = w.proposals.iter().find(|p| p.text.is_empty()) {
            return Err(OracleError::InvariantViolation(format!("empty proposal text (prior {})", p.prior)));
        }
        if let Some(p) = w.proposals.iter().find(|p| !p.prior.is_finite() || p.prior < 0.0) {
            return Err(OracleError::InvariantViolation(format!("invalid prior {}", p.prior)));
        }
        w.proposals.truncate(k);
        normalize_priors(&mut w.proposals);
        Ok(w.proposals)
    }
}

//! End-to-end evaluation: retrieve, select context, search for an answer,
//! score it. A failing query is recorded and the run moves on.

use std::cell::Cell;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::{OracleMode, PipelineConfig, Selector};
use crate::corpus::{stable_hash, ChunkStore, Embedder, HashEmbedder, QueryRecord};
use crate::error::{Error, Result};
use crate::mcts::{search, AugmentRetriever, ExtractivePolicy, NliReward, PlannerState, PolicyOracle, SearchEnv};
use crate::metrics::{exact_match, f1_score, faithfulness_metrics, recall_at_5};
use crate::mmkp::{fusion_top_k, mmr_select, select_context};
use crate::nli::{compute_reward, MockNli, NliVerdict, Verifier};
use crate::remote::{OracleError, RemoteClient, RemoteEmbedder, RemotePolicy, RemoteVerifier};
use crate::retrieval::{retrieve_with_vector, ScoredChunk, SparseIndex};

/// The three model oracles a run depends on.
pub struct Oracles<'a> {
    pub embedder: Box<dyn Embedder + 'a>,
    pub policy: Box<dyn PolicyOracle + 'a>,
    pub verifier: Box<dyn Verifier + 'a>,
}

impl<'a> Oracles<'a> {
    /// Offline oracles: hash embeddings, extractive policy, lexical verifier.
    pub fn mock(store: &'a ChunkStore) -> Self {
        Self {
            embedder: Box::new(HashEmbedder { dim: store.dim() }),
            policy: Box::new(ExtractivePolicy::new(store)),
            verifier: Box::new(MockNli::default()),
        }
    }

    /// HTTP oracles from the configured endpoints. Without an embedder
    /// endpoint queries use the hash embedder.
    pub fn remote(config: &PipelineConfig, dim: usize) -> Result<Self> {
        let o = &config.oracles;
        let timeout = Duration::from_millis(o.timeout_ms);
        let need = |url: &Option<String>, name: &str| {
            url.clone()
                .ok_or_else(|| Error::Validation(format!("remote mode needs oracles.{name}")))
        };
        let generator = need(&o.generator_url, "generator_url")?;
        let verifier = need(&o.verifier_url, "verifier_url")?;
        let embedder: Box<dyn Embedder> = match &o.embedder_url {
            Some(url) => Box::new(RemoteEmbedder::new(RemoteClient::new(url, timeout), dim)),
            None => Box::new(HashEmbedder { dim }),
        };
        Ok(Self {
            embedder,
            policy: Box::new(RemotePolicy::new(RemoteClient::new(generator, timeout))),
            verifier: Box::new(RemoteVerifier::new(RemoteClient::new(verifier, timeout))),
        })
    }
}

struct CountingVerifier<'a> {
    inner: &'a dyn Verifier,
    calls: Cell<u64>,
}

impl Verifier for CountingVerifier<'_> {
    fn verify(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, OracleError> {
        self.calls.set(self.calls.get() + 1);
        self.inner.verify(premise, hypothesis)
    }
}

/// Hybrid retrieval exposed to augment actions.
pub struct HybridRetriever<'a> {
    pub store: &'a ChunkStore,
    pub index: &'a SparseIndex,
    pub embedder: &'a dyn Embedder,
    pub params: &'a crate::retrieval::RetrievalParams,
}

impl AugmentRetriever for HybridRetriever<'_> {
    fn retrieve(&self, query: &str) -> Result<Vec<String>> {
        let q = self.embedder.embed(query)?;
        let ranked = retrieve_with_vector(&q, query, self.store, self.index, self.params)?;
        Ok(ranked.into_iter().map(|c| c.chunk_id).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub em: f64,
    pub f1: f64,
    pub recall5: f64,
    /// Recall@5 of plain fusion-order truncation on the same candidates.
    pub topk_recall5: f64,
    pub reward: f64,
    pub ap: f64,
    pub cr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub query_id: String,
    /// Selected context, by descending fusion score.
    pub selected_ids: Vec<String>,
    pub topk_ids: Vec<String>,
    pub answer: String,
    /// Context of the final answer, including augmented chunks.
    pub answer_context_ids: Vec<String>,
    pub metrics: Option<QueryMetrics>,
    pub tree_nodes: usize,
    pub verifier_calls: u64,
    pub error: Option<String>,
    pub oracle_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub queries: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub oracle_failures: usize,
    pub selector: Selector,
    pub seed: u64,
    /// Means over succeeded queries.
    pub em: f64,
    pub f1: f64,
    pub recall5: f64,
    pub topk_recall5: f64,
    pub reward: f64,
    pub ap: f64,
    pub cr: f64,
    pub tree_nodes: usize,
    pub verifier_calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub queries: Vec<QueryReport>,
    pub aggregate: Aggregate,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ReportLine<'a> {
    Query(&'a QueryReport),
    Aggregate(&'a Aggregate),
}

impl EvalReport {
    /// One JSON object per query, then the aggregate.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for q in &self.queries {
            serde_json::to_writer(&mut out, &ReportLine::Query(q))?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut out, &ReportLine::Aggregate(&self.aggregate))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }

    /// Share of queries that failed on an oracle call.
    pub fn oracle_failure_rate(&self) -> f64 {
        if self.aggregate.queries == 0 {
            0.0
        } else {
            self.aggregate.oracle_failures as f64 / self.aggregate.queries as f64
        }
    }

    pub fn summary_table(&self) -> String {
        let a = &self.aggregate;
        let mut s = String::new();
        let _ = writeln!(s, "{:<28} {:>10}", "metric", "value");
        let _ = writeln!(s, "{}", "-".repeat(39));
        let rows: [(&str, String); 12] = [
            ("queries", a.queries.to_string()),
            ("succeeded", a.succeeded.to_string()),
            ("oracle failures", a.oracle_failures.to_string()),
            ("EM", format!("{:.4}", a.em)),
            ("F1", format!("{:.4}", a.f1)),
            ("Recall@5", format!("{:.4}", a.recall5)),
            ("Recall@5 (top-k baseline)", format!("{:.4}", a.topk_recall5)),
            ("reward", format!("{:.4}", a.reward)),
            ("AP (sentence-level proxy)", format!("{:.4}", a.ap)),
            ("CR", format!("{:.4}", a.cr)),
            ("tree nodes", a.tree_nodes.to_string()),
            ("verifier calls", a.verifier_calls.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<28} {v:>10}");
        }
        s
    }
}

pub struct Pipeline<'a> {
    pub config: &'a PipelineConfig,
    pub store: &'a ChunkStore,
    pub index: SparseIndex,
}

fn order_by_fusion(ids: &[String], candidates: &[ScoredChunk]) -> Vec<String> {
    candidates
        .iter()
        .filter(|c| ids.contains(&c.chunk_id))
        .map(|c| c.chunk_id.clone())
        .collect()
}

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a PipelineConfig, store: &'a ChunkStore) -> Result<Self> {
        config.validate()?;
        if store.dim() != config.dim {
            return Err(Error::Validation(format!(
                "corpus dimension {} differs from configured dim {}",
                store.dim(),
                config.dim
            )));
        }
        let index = SparseIndex::build(store, config.retrieval.max_features);
        Ok(Self { config, store, index })
    }

    /// Context chosen by the configured selector, ordered by fusion score.
    pub fn select(&self, candidates: &[ScoredChunk]) -> Result<Vec<String>> {
        let cfg = self.config;
        match cfg.selector {
            Selector::Mmkp => Ok(select_context(candidates, self.store, &cfg.mmkp)?.context),
            Selector::Topk => fusion_top_k(candidates, self.store, cfg.mmkp.c_token),
            Selector::Mmr => {
                let ids = mmr_select(candidates, self.store, cfg.mmr_lambda, cfg.mmkp.c_token)?;
                Ok(order_by_fusion(&ids, candidates))
            }
        }
    }

    pub fn run_query(&self, query: &QueryRecord, oracles: &Oracles<'_>) -> QueryReport {
        let verifier = CountingVerifier { inner: oracles.verifier.as_ref(), calls: Cell::new(0) };
        let mut report = QueryReport {
            query_id: query.id.clone(),
            selected_ids: Vec::new(),
            topk_ids: Vec::new(),
            answer: String::new(),
            answer_context_ids: Vec::new(),
            metrics: None,
            tree_nodes: 0,
            verifier_calls: 0,
            error: None,
            oracle_failure: false,
        };
        if let Err(e) = self.fill(query, oracles, &verifier, &mut report) {
            report.oracle_failure = matches!(e, Error::Oracle(_));
            report.error = Some(e.to_string());
        }
        report.verifier_calls = verifier.calls.get();
        report
    }

    fn fill(
        &self,
        query: &QueryRecord,
        oracles: &Oracles<'_>,
        verifier: &dyn Verifier,
        report: &mut QueryReport,
    ) -> Result<()> {
        if query.gold_answers.is_empty() || query.gold_passage_ids.is_empty() {
            return Err(Error::Validation(format!(
                "query {:?} lacks gold answers or gold passages",
                query.id
            )));
        }
        let cfg = self.config;
        let q_vec = oracles.embedder.embed(&query.text)?;
        let candidates = retrieve_with_vector(&q_vec, &query.text, self.store, &self.index, &cfg.retrieval)?;
        report.selected_ids = self.select(&candidates)?;
        report.topk_ids = fusion_top_k(&candidates, self.store, cfg.mmkp.c_token)?;

        let retriever = HybridRetriever {
            store: self.store,
            index: &self.index,
            embedder: oracles.embedder.as_ref(),
            params: &cfg.retrieval,
        };
        let reward = NliReward { store: self.store, verifier, weights: cfg.reward };
        let env = SearchEnv {
            policy: oracles.policy.as_ref(),
            reward: &reward,
            retriever: if cfg.mcts.m > 0 { Some(&retriever) } else { None },
        };
        let root = PlannerState::new(query.text.clone(), report.selected_ids.iter().cloned().collect::<BTreeSet<_>>());
        let seed = cfg.seed ^ stable_hash(query.id.as_bytes());
        let outcome = search(root, &env, &cfg.mcts.search_config(seed))?;
        report.tree_nodes = outcome.tree.len();
        report.answer = outcome.answer.clone();
        report.answer_context_ids = outcome.context_ids.iter().cloned().collect();

        let evidence: Vec<String> = outcome
            .context_ids
            .iter()
            .filter_map(|id| self.store.get(id).map(|c| c.text.clone()))
            .collect();
        let r = compute_reward(&outcome.answer, &evidence, &cfg.reward, verifier)?;
        let faith = faithfulness_metrics(&outcome.answer, &evidence, &cfg.reward, verifier)?;
        report.metrics = Some(QueryMetrics {
            em: exact_match(&outcome.answer, &query.gold_answers),
            f1: f1_score(&outcome.answer, &query.gold_answers),
            recall5: recall_at_5(&report.selected_ids, &query.gold_passage_ids),
            topk_recall5: recall_at_5(&report.topk_ids, &query.gold_passage_ids),
            reward: r,
            ap: faith.ap,
            cr: faith.cr,
        });
        Ok(())
    }

    pub fn evaluate(&self, queries: &[QueryRecord], oracles: &Oracles<'_>) -> EvalReport {
        let reports: Vec<QueryReport> = queries.iter().map(|q| self.run_query(q, oracles)).collect();
        let ok: Vec<&QueryMetrics> = reports.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let mean = |f: fn(&QueryMetrics) -> f64| {
            if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|m| f(m)).sum::<f64>() / ok.len() as f64
            }
        };
        let aggregate = Aggregate {
            queries: reports.len(),
            succeeded: ok.len(),
            failed: reports.len() - ok.len(),
            oracle_failures: reports.iter().filter(|r| r.oracle_failure).count(),
            selector: self.config.selector,
            seed: self.config.seed,
            em: mean(|m| m.em),
            f1: mean(|m| m.f1),
            recall5: mean(|m| m.recall5),
            topk_recall5: mean(|m| m.topk_recall5),
            reward: mean(|m| m.reward),
            ap: mean(|m| m.ap),
            cr: mean(|m| m.cr),
            tree_nodes: reports.iter().map(|r| r.tree_nodes).sum(),
            verifier_calls: reports.iter().map(|r| r.verifier_calls).sum(),
        };
        EvalReport { queries: reports, aggregate }
    }
}

/// Loads inputs and evaluates every query with the configured oracles.
pub fn run_eval(
    config: &PipelineConfig,
    corpus: &ChunkStore,
    queries: &[QueryRecord],
) -> Result<EvalReport> {
    let pipeline = Pipeline::new(config, corpus)?;
    let oracles = match config.oracles.mode {
        OracleMode::Mock => Oracles::mock(corpus),
        OracleMode::Remote => Oracles::remote(config, corpus.dim())?,
    };
    Ok(pipeline.evaluate(queries, &oracles))
}

//! Hybrid dense/sparse retrieval: cosine ranking with centroid query
//! expansion, TF-IDF over 1- and 2-grams, and reciprocal rank fusion.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{hash_embed, normalize_or_basis, ChunkStore, QueryRecord};
use crate::error::{Error, Result};

pub const DEFAULT_K_RRF: u32 = 60;
pub const DEFAULT_EXPAND_M: usize = 5;
pub const DEFAULT_MAX_FEATURES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    pub dense_rank: u32,
    pub sparse_rank: u32,
    pub fusion_score: f64,
    /// Cosine against the expanded query; 0 when produced by `rrf_fuse` alone.
    pub dense_sim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalParams {
    pub n: usize,
    pub k_rrf: u32,
    pub expand_m: usize,
    pub max_features: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            n: 20,
            k_rrf: DEFAULT_K_RRF,
            expand_m: DEFAULT_EXPAND_M,
            max_features: DEFAULT_MAX_FEATURES,
        }
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { left: u.len(), right: v.len() });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Lowercased whitespace unigrams followed by adjacent-pair bigrams.
pub fn ngrams(text: &str) -> Vec<String> {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    let mut out = words.clone();
    out.extend(words.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

/// Something that scores every chunk of a store against raw query text.
/// Scores are returned in store order.
pub trait SparseScorer {
    fn score_all(&self, query_text: &str) -> Vec<f64>;
}

/// TF-IDF index with smoothed idf and L2-normalized rows.
#[derive(Debug, Clone)]
pub struct SparseIndex {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    doc_vectors: Vec<Vec<(usize, f64)>>,
}

impl SparseIndex {
    pub fn build(store: &ChunkStore, max_features: usize) -> Self {
        let n_docs = store.len();
        let doc_counts: Vec<HashMap<String, u32>> = store
            .chunks()
            .iter()
            .map(|c| {
                let mut tf = HashMap::new();
                for g in ngrams(&c.text) {
                    *tf.entry(g).or_insert(0) += 1;
                }
                tf
            })
            .collect();

        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for tf in &doc_counts {
            for term in tf.keys() {
                *df.entry(term.as_str()).or_insert(0) += 1;
            }
        }

        // keep the highest-df terms; ties go to the lexicographically smaller term
        let mut terms: Vec<(&str, u32)> = df.into_iter().collect();
        if terms.len() > max_features {
            terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            terms.truncate(max_features);
            terms.sort_by(|a, b| a.0.cmp(b.0));
        }

        let vocabulary: BTreeMap<String, usize> = terms
            .iter()
            .enumerate()
            .map(|(col, (t, _))| (t.to_string(), col))
            .collect();
        let idf: Vec<f64> = terms
            .iter()
            .map(|(_, d)| ((1.0 + n_docs as f64) / (1.0 + f64::from(*d))).ln() + 1.0)
            .collect();

        let doc_vectors = doc_counts
            .iter()
            .map(|tf| {
                let counts = tf.iter().map(|(t, c)| (t.as_str(), *c));
                weigh(&vocabulary, &idf, counts)
            })
            .collect();

        Self { vocabulary, idf, doc_vectors }
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&c| self.idf[c])
    }

    /// Sparse row of the `i`-th chunk as (column, weight) pairs sorted by column.
    pub fn doc_vector(&self, i: usize) -> &[(usize, f64)] {
        &self.doc_vectors[i]
    }

    /// TF-IDF vector of arbitrary text under this vocabulary.
    pub fn transform(&self, text: &str) -> Vec<(usize, f64)> {
        let mut tf: HashMap<String, u32> = HashMap::new();
        for g in ngrams(text) {
            *tf.entry(g).or_insert(0) += 1;
        }
        weigh(&self.vocabulary, &self.idf, tf.iter().map(|(t, c)| (t.as_str(), *c)))
    }

    /// Weight of `term` in the `i`-th chunk (0 when out of vocabulary).
    pub fn weight(&self, i: usize, term: &str) -> f64 {
        let Some(&col) = self.vocabulary.get(term) else {
            return 0.0;
        };
        self.doc_vectors[i]
            .binary_search_by_key(&col, |&(c, _)| c)
            .map(|pos| self.doc_vectors[i][pos].1)
            .unwrap_or(0.0)
    }

    /// Copies each chunk's term weights into `store`.
    pub fn fill_terms(&self, store: &mut ChunkStore) {
        let names: BTreeMap<usize, &str> =
            self.vocabulary.iter().map(|(t, &c)| (c, t.as_str())).collect();
        for (i, chunk) in store.chunks_mut().iter_mut().enumerate() {
            chunk.terms = self.doc_vectors[i]
                .iter()
                .map(|&(c, w)| (names[&c].to_string(), w))
                .collect();
        }
    }
}

fn weigh<'a>(
    vocabulary: &BTreeMap<String, usize>,
    idf: &[f64],
    counts: impl Iterator<Item = (&'a str, u32)>,
) -> Vec<(usize, f64)> {
    let mut row: Vec<(usize, f64)> = counts
        .filter_map(|(t, c)| vocabulary.get(t).map(|&col| (col, f64::from(c) * idf[col])))
        .collect();
    row.sort_by_key(|&(c, _)| c);
    let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        row.iter_mut().for_each(|(_, w)| *w /= norm);
    }
    row
}

pub(crate) fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

impl SparseScorer for SparseIndex {
    fn score_all(&self, query_text: &str) -> Vec<f64> {
        let q = self.transform(query_text);
        self.doc_vectors.iter().map(|d| sparse_dot(&q, d)).collect()
    }
}

pub fn build_sparse_index(store: &ChunkStore, max_features: usize) -> SparseIndex {
    SparseIndex::build(store, max_features)
}

/// Orders ids by descending score, ties by id.
fn rank_by_score(store: &ChunkStore, scores: &[f64]) -> Vec<String> {
    let mut order: Vec<usize> = (0..store.len()).collect();
    let chunks = store.chunks();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| chunks[a].id.cmp(&chunks[b].id))
    });
    order.into_iter().map(|i| chunks[i].id.clone()).collect()
}

/// Fuses two rankings of the same id set by Σ 1/(k + rank).
pub fn rrf_fuse(dense: &[String], sparse: &[String], k_rrf: u32) -> Result<Vec<ScoredChunk>> {
    if k_rrf == 0 {
        return Err(Error::InvalidArgument("k_rrf must be positive".into()));
    }
    let mut sparse_rank: HashMap<&str, u32> = HashMap::with_capacity(sparse.len());
    for (i, id) in sparse.iter().enumerate() {
        if sparse_rank.insert(id.as_str(), i as u32 + 1).is_some() {
            return Err(Error::Validation(format!("id {id:?} repeated in sparse ranking")));
        }
    }
    if dense.len() != sparse.len() {
        let in_sparse = dense.iter().find(|id| !sparse_rank.contains_key(id.as_str()));
        let id = match in_sparse {
            Some(id) => id.clone(),
            None => {
                let dense_set: std::collections::HashSet<&str> =
                    dense.iter().map(String::as_str).collect();
                sparse
                    .iter()
                    .find(|id| !dense_set.contains(id.as_str()))
                    .cloned()
                    .unwrap_or_default()
            }
        };
        return Err(Error::RankingMismatch(id));
    }
    let k = f64::from(k_rrf);
    let mut seen = std::collections::HashSet::with_capacity(dense.len());
    let mut fused = Vec::with_capacity(dense.len());
    for (i, id) in dense.iter().enumerate() {
        if !seen.insert(id.as_str()) {
            return Err(Error::Validation(format!("id {id:?} repeated in dense ranking")));
        }
        let d = i as u32 + 1;
        let s = *sparse_rank
            .get(id.as_str())
            .ok_or_else(|| Error::RankingMismatch(id.clone()))?;
        fused.push(ScoredChunk {
            chunk_id: id.clone(),
            dense_rank: d,
            sparse_rank: s,
            fusion_score: 1.0 / (k + f64::from(d)) + 1.0 / (k + f64::from(s)),
            dense_sim: 0.0,
        });
    }
    fused.sort_by(|a, b| {
        b.fusion_score
            .total_cmp(&a.fusion_score)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    Ok(fused)
}

/// Normalized mean of the query vector and its top-`m` neighbours by cosine.
pub fn expand_query(q_vec: &[f64], store: &ChunkStore, m: usize) -> Result<Vec<f64>> {
    if q_vec.len() != store.dim() {
        return Err(Error::DimensionMismatch { left: q_vec.len(), right: store.dim() });
    }
    let sims = dense_scores(q_vec, store)?;
    let ranked = rank_by_score(store, &sims);
    let mut acc = q_vec.to_vec();
    let take = m.min(ranked.len());
    for id in &ranked[..take] {
        let emb = &store.get(id).expect("ranked id comes from store").embedding;
        acc.iter_mut().zip(emb).for_each(|(a, e)| *a += e);
    }
    let count = (take + 1) as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    normalize_or_basis(&mut acc);
    Ok(acc)
}

fn dense_scores(q_vec: &[f64], store: &ChunkStore) -> Result<Vec<f64>> {
    store.chunks().iter().map(|c| cosine(q_vec, &c.embedding)).collect()
}

/// Full hybrid retrieval for an already-embedded query.
pub fn retrieve_with_vector(
    q_vec: &[f64],
    query_text: &str,
    store: &ChunkStore,
    scorer: &dyn SparseScorer,
    params: &RetrievalParams,
) -> Result<Vec<ScoredChunk>> {
    if store.is_empty() {
        return Ok(Vec::new());
    }
    if params.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let expanded = expand_query(q_vec, store, params.expand_m)?;
    let dense_sims = dense_scores(&expanded, store)?;
    let dense = rank_by_score(store, &dense_sims);
    let sparse = rank_by_score(store, &scorer.score_all(query_text));
    let mut fused = rrf_fuse(&dense, &sparse, params.k_rrf)?;
    fused.truncate(params.n);
    for sc in &mut fused {
        let pos = store.position(&sc.chunk_id).expect("fused id comes from store");
        sc.dense_sim = dense_sims[pos];
    }
    Ok(fused)
}

/// Hybrid retrieval using the hash embedder for the query.
pub fn retrieve(
    query: &QueryRecord,
    store: &ChunkStore,
    index: &SparseIndex,
    params: &RetrievalParams,
) -> Result<Vec<ScoredChunk>> {
    if store.is_empty() {
        return Ok(Vec::new());
    }
    let q_vec = hash_embed(&query.text, store.dim());
    retrieve_with_vector(&q_vec, &query.text, store, index, params)
}

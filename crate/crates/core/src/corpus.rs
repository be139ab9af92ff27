//! Chunk and query loading, token counting and the deterministic hash embedder.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::remote::OracleError;

const NORM_TOLERANCE: f64 = 1e-6;

/// A retrievable passage.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub id: String,
    pub text: String,
    pub token_len: u64,
    /// Unit-norm dense vector of the store's dimension.
    pub embedding: Vec<f64>,
    /// Sparse term weights; empty until a sparse index fills them in.
    pub terms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub gold_answers: Vec<String>,
    #[serde(default)]
    pub gold_passage_ids: Vec<String>,
}

/// Immutable collection of chunks sharing one embedding dimension.
#[derive(Debug, Clone)]
pub struct ChunkStore {
    chunks: Vec<Chunk>,
    dim: usize,
    by_id: BTreeMap<String, usize>,
}

/// On-disk shape of one corpus line.
#[derive(Debug, Serialize, Deserialize)]
struct ChunkRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token_len: Option<u64>,
}

/// Number of maximal whitespace-delimited substrings.
pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// FNV-1a, 64-bit.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

/// Bag-of-words embedding: each lowercased whitespace token adds one to the
/// bucket `stable_hash(token) % dim`, then the vector is L2-normalized.
/// Text with no tokens maps to the first basis vector.
pub fn hash_embed(text: &str, dim: usize) -> Vec<f64> {
    assert!(dim >= 2, "hash_embed needs dim >= 2");
    let mut v = vec![0.0; dim];
    for token in text.split_whitespace() {
        let token = token.to_lowercase();
        let bucket = (stable_hash(token.as_bytes()) % dim as u64) as usize;
        v[bucket] += 1.0;
    }
    normalize_or_basis(&mut v);
    v
}

/// Dense text embedder producing unit vectors of a fixed dimension.
pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, OracleError>;
}

/// [`hash_embed`] behind the [`Embedder`] interface.
#[derive(Debug, Clone, Copy)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, OracleError> {
        Ok(hash_embed(text, self.dim))
    }
}

/// L2-normalizes in place; an all-zero vector becomes e₀.
pub(crate) fn normalize_or_basis(v: &mut [f64]) {
    let norm = l2_norm(v);
    if norm == 0.0 {
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
        return;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl ChunkStore {
    /// Builds a store, checking id uniqueness, dimensions and unit norms.
    pub fn new(chunks: Vec<Chunk>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dimension must be positive".into()));
        }
        let mut by_id = BTreeMap::new();
        let mut dups = Vec::new();
        for (i, c) in chunks.iter().enumerate() {
            if by_id.insert(c.id.clone(), i).is_some() {
                dups.push(c.id.clone());
            }
            if c.embedding.len() != dim {
                return Err(Error::Validation(format!(
                    "chunk {:?} has embedding dimension {}, expected {dim}",
                    c.id,
                    c.embedding.len()
                )));
            }
            let norm = l2_norm(&c.embedding);
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "chunk {:?} embedding is not unit-norm (|v| = {norm})",
                    c.id
                )));
            }
        }
        if !dups.is_empty() {
            dups.sort();
            dups.dedup();
            return Err(Error::Validation(format!("duplicate chunk ids: {}", dups.join(", "))));
        }
        Ok(Self { chunks, dim, by_id })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn get(&self, id: &str) -> Option<&Chunk> {
        self.by_id.get(id).map(|&i| &self.chunks[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub(crate) fn chunks_mut(&mut self) -> &mut [Chunk] {
        &mut self.chunks
    }

    /// Writes the store back out in the line-delimited corpus format.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for c in &self.chunks {
            let rec = ChunkRecord {
                id: c.id.clone(),
                text: c.text.clone(),
                embedding: Some(c.embedding.clone()),
                token_len: Some(c.token_len),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parses a line-delimited corpus. Chunks without an embedding get
/// `hash_embed(text, dim)`; missing token lengths are recomputed. Supplied
/// embeddings are normalized.
pub fn parse_corpus(contents: &str, dim: usize) -> Result<ChunkStore> {
    if dim < 2 {
        return Err(Error::Validation("embedding dimension must be at least 2".into()));
    }
    let mut chunks = Vec::new();
    for (lineno, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ChunkRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let embedding = match rec.embedding {
            Some(mut v) => {
                if v.len() != dim {
                    return Err(Error::Validation(format!(
                        "line {}: chunk {:?} has embedding dimension {}, expected {dim}",
                        lineno + 1,
                        rec.id,
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Validation(format!(
                        "line {}: chunk {:?} has a non-finite embedding",
                        lineno + 1,
                        rec.id
                    )));
                }
                normalize_or_basis(&mut v);
                v
            }
            None => hash_embed(&rec.text, dim),
        };
        let token_len = rec.token_len.unwrap_or_else(|| count_tokens(&rec.text));
        chunks.push(Chunk {
            id: rec.id,
            text: rec.text,
            token_len,
            embedding,
            terms: BTreeMap::new(),
        });
    }
    ChunkStore::new(chunks, dim)
}

pub fn load_corpus(path: impl AsRef<Path>, dim: usize) -> Result<ChunkStore> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_corpus(&contents, dim)
}

pub fn parse_queries(contents: &str) -> Result<Vec<QueryRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: QueryRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(q.id.clone()) {
            return Err(Error::Validation(format!("duplicate query id {:?}", q.id)));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>> {
    let path = path.as_ref();
    let contents = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_queries(&contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_tokens_whitespace_rule() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("a b  c"), 3);
        assert_eq!(count_tokens("  \t\n "), 0);
    }

    #[test]
    fn count_tokens_matches_default_token_budget() {
        let text: String = (0..1500).map(|i| format!("w{i} ")).collect();
        // independent count: number of 'w' prefixes
        let expected = text.matches('w').count() as u64;
        assert_eq!(expected, 1500);
        assert_eq!(count_tokens(&text), expected);
    }

    #[test]
    fn fnv1a_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(stable_hash(b""), 0xcbf29ce484222325);
        assert_eq!(stable_hash(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(stable_hash(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn empty_text_embeds_to_first_basis_vector() {
        assert_eq!(hash_embed("", 8), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn hash_embed_is_deterministic_and_unit() {
        let a = hash_embed("The quick brown fox", 16);
        let b = hash_embed("The quick brown fox", 16);
        assert_eq!(a, b);
        assert!((l2_norm(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_single_token_normalizes_away() {
        // "a" lands in one bucket; two copies give count 2 in that bucket,
        // both normalize to the same basis vector
        let bucket = (stable_hash(b"a") % 8) as usize;
        let mut expected = vec![0.0; 8];
        expected[bucket] = 1.0;
        assert_eq!(hash_embed("a a", 8), expected);
        assert_eq!(hash_embed("a", 8), expected);
        assert_eq!(hash_embed("A", 8), expected);
    }

    #[test]
    fn load_two_chunks_with_embeddings() {
        let src = r#"{"id":"c1","text":"alpha beta","embedding":[1.0,0.0]}
{"id":"c2","text":"gamma","embedding":[0.0,1.0],"token_len":7}
"#;
        let store = parse_corpus(src, 2).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.dim(), 2);
        assert_eq!(store.get("c1").unwrap().token_len, 2);
        assert_eq!(store.get("c2").unwrap().token_len, 7);
        assert_eq!(store.get("c2").unwrap().embedding, vec![0.0, 1.0]);
    }

    #[test]
    fn missing_embedding_gets_hash_embedding() {
        let src = r#"{"id":"c1","text":"hello world"}"#;
        let store = parse_corpus(src, 8).unwrap();
        let emb = &store.get("c1").unwrap().embedding;
        // recompute buckets by hand
        let mut expected = vec![0.0; 8];
        for t in ["hello", "world"] {
            expected[(stable_hash(t.as_bytes()) % 8) as usize] += 1.0;
        }
        let n = expected.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        expected.iter_mut().for_each(|x| *x /= n);
        for (a, b) in emb.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((l2_norm(emb) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let src = r#"{"id":"c1","text":"a"}
{"id":"c1","text":"b"}"#;
        match parse_corpus(src, 4) {
            Err(Error::Validation(msg)) => assert!(msg.contains("c1"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let src = "{\"id\":\"c1\",\"text\":\"a\"}\n{not json}\n";
        match parse_corpus(src, 4) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_embedding_dim_rejected() {
        let src = r#"{"id":"c1","text":"a","embedding":[1.0,0.0,0.0]}"#;
        assert!(matches!(parse_corpus(src, 2), Err(Error::Validation(_))));
    }

    #[test]
    fn queries_parse() {
        let src = r#"{"id":"q1","text":"who?","gold_answers":["x"],"gold_passage_ids":["c1"]}"#;
        let qs = parse_queries(src).unwrap();
        assert_eq!(qs[0].gold_passage_ids, vec!["c1"]);
    }
}

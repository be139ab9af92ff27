//! Retrieval-augmented answering with budgeted context selection and
//! entailment-guided answer search.
//!
//! The pipeline runs hybrid dense/sparse retrieval, groups the candidates
//! by similarity, picks a context by solving a multiple-choice knapsack
//! over a token and redundancy budget, then searches over answer
//! continuations with PUCT tree search scored by an entailment reward.

pub mod config;
pub mod corpus;
pub mod error;
pub mod mcts;
pub mod metrics;
pub mod mmkp;
pub mod nli;
pub mod pipeline;
pub mod remote;
pub mod retrieval;

pub use config::{OracleMode, PipelineConfig, Selector};
pub use corpus::{hash_embed, load_corpus, load_queries, Chunk, ChunkStore, QueryRecord};
pub use error::{Error, Result};
pub use mmkp::{solve_exact, solve_pareto_dp, Cost, MmkpInstance, MmkpSolution};
pub use nli::{compute_reward, MockNli, NliVerdict, RewardWeights, Verifier};
pub use pipeline::{run_eval, EvalReport, Pipeline};
pub use retrieval::{retrieve, rrf_fuse, RetrievalParams, ScoredChunk, SparseIndex};

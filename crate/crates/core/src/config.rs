//! Pipeline configuration loaded from a TOML file.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcts::SearchConfig;
use crate::mmkp::MmkpParams;
use crate::nli::RewardWeights;
use crate::retrieval::RetrievalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    #[default]
    Mock,
    Remote,
}

/// How the context for each query is chosen from the retrieved candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    #[default]
    Mmkp,
    Topk,
    Mmr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub mode: OracleMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedder_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verifier_url: Option<String>,
    pub timeout_ms: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            mode: OracleMode::Mock,
            embedder_url: None,
            generator_url: None,
            verifier_url: None,
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsParams {
    pub n_sim: u32,
    pub k: usize,
    pub m: usize,
    pub max_depth: u32,
    pub c_puct: f64,
}

impl Default for MctsParams {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self { n_sim: d.n_sim, k: d.k, m: d.m, max_depth: d.max_depth, c_puct: d.c_puct }
    }
}

impl MctsParams {
    pub fn search_config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            n_sim: self.n_sim,
            k: self.k,
            m: self.m,
            max_depth: self.max_depth,
            c_puct: self.c_puct,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Embedding dimension of the corpus and queries.
    pub dim: usize,
    /// MMR trade-off used when `selector = "mmr"`.
    pub mmr_lambda: f64,
    pub selector: Selector,
    pub retrieval: RetrievalParams,
    pub mmkp: MmkpParams,
    pub mcts: MctsParams,
    pub reward: RewardWeights,
    pub oracles: OracleConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dim: 1024,
            mmr_lambda: 0.7,
            selector: Selector::Mmkp,
            retrieval: RetrievalParams::default(),
            mmkp: MmkpParams::default(),
            mcts: MctsParams::default(),
            reward: RewardWeights::default(),
            oracles: OracleConfig::default(),
        }
    }
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(msg.to_string()))
    }
}

impl PipelineConfig {
    pub fn parse(contents: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(contents).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let contents = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&contents)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        check(self.dim >= 2, "dim must be at least 2")?;
        check((0.0..=1.0).contains(&self.mmr_lambda), "mmr_lambda must lie in [0, 1]")?;
        let r = &self.retrieval;
        check(r.n >= 1, "retrieval.n must be at least 1")?;
        check(r.k_rrf >= 1, "retrieval.k_rrf must be at least 1")?;
        check(r.expand_m >= 1, "retrieval.expand_m must be at least 1")?;
        check(r.max_features >= 1, "retrieval.max_features must be at least 1")?;
        let m = &self.mmkp;
        check(m.c_red.is_finite() && m.c_red >= 0.0, "mmkp.c_red must be finite and non-negative")?;
        check(m.alpha >= 0.0 && m.beta >= 0.0, "mmkp.alpha and mmkp.beta must be non-negative")?;
        check(m.tau > 0.0 && m.tau <= 1.0, "mmkp.tau must lie in (0, 1]")?;
        check(m.lambda_red.is_finite() && m.lambda_red >= 0.0, "mmkp.lambda_red must be non-negative")?;
        let s = &self.mcts;
        check(s.n_sim >= 1, "mcts.n_sim must be at least 1")?;
        check(s.k >= 1, "mcts.k must be at least 1")?;
        check(s.max_depth >= 1, "mcts.max_depth must be at least 1")?;
        check(s.c_puct.is_finite() && s.c_puct >= 0.0, "mcts.c_puct must be non-negative")?;
        self.reward.validate()?;
        check(self.oracles.timeout_ms >= 1, "oracles.timeout_ms must be positive")?;
        if self.oracles.mode == OracleMode::Remote {
            check(
                self.oracles.generator_url.is_some() && self.oracles.verifier_url.is_some(),
                "remote mode needs oracles.generator_url and oracles.verifier_url",
            )?;
        }
        Ok(())
    }
}

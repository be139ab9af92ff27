use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    group_chunks, item_costs, item_utility, normalize_fusion, solve_pareto_dp, Cost, Group,
    GroupItems, MmkpInstance, MmkpItem, MmkpSolution,
};
use crate::corpus::ChunkStore;
use crate::error::{Error, Result};
use crate::retrieval::{cosine, ScoredChunk};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmkpParams {
    pub c_token: u64,
    pub c_red: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub lambda_red: f64,
}

impl Default for MmkpParams {
    fn default() -> Self {
        Self { c_token: 1500, c_red: 120.0, alpha: 0.7, beta: 0.3, tau: 0.82, lambda_red: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextSelection {
    pub groups: Vec<Group>,
    pub instance: MmkpInstance,
    pub solution: MmkpSolution,
    /// Selected chunk ids by descending fusion score.
    pub context: Vec<String>,
}

/// Groups candidates, prices every item and solves the resulting MMKP with
/// the Pareto DP.
pub fn select_context(
    candidates: &[ScoredChunk],
    store: &ChunkStore,
    params: &MmkpParams,
) -> Result<ContextSelection> {
    if params.alpha < 0.0 || params.beta < 0.0 {
        return Err(Error::InvalidArgument("alpha and beta must be non-negative".into()));
    }
    let groups = group_chunks(candidates, store, params.tau)?;
    let raw: Vec<f64> = candidates.iter().map(|c| c.fusion_score).collect();
    let normalized: HashMap<&str, f64> = candidates
        .iter()
        .zip(normalize_fusion(&raw))
        .map(|(c, f)| (c.chunk_id.as_str(), f))
        .collect();

    let mut grouped = Vec::with_capacity(groups.len());
    for g in &groups {
        let mut items = Vec::with_capacity(g.member_ids.len());
        for id in &g.member_ids {
            let chunk = store.get(id).expect("grouped ids come from the store");
            items.push(MmkpItem {
                chunk_id: id.clone(),
                group_index: g.index,
                value: item_utility(normalized[id.as_str()], &chunk.embedding, &g.centroid, params.alpha, params.beta)?,
                cost: item_costs(chunk, g, store, params.lambda_red)?,
            });
        }
        grouped.push(GroupItems { group: g.clone(), items });
    }
    let instance = MmkpInstance { groups: grouped, capacity: Cost::new(params.c_token, params.c_red) };
    let solution = solve_pareto_dp(&instance)?;

    let context = order_by_fusion(candidates, &solution.selected);
    Ok(ContextSelection { groups, instance, solution, context })
}

fn order_by_fusion(candidates: &[ScoredChunk], ids: &[String]) -> Vec<String> {
    let mut chosen: Vec<&ScoredChunk> =
        candidates.iter().filter(|c| ids.contains(&c.chunk_id)).collect();
    chosen.sort_by(|a, b| {
        b.fusion_score
            .total_cmp(&a.fusion_score)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    chosen.into_iter().map(|c| c.chunk_id.clone()).collect()
}

/// Plain truncation baseline: walk candidates by fusion score and stop at
/// the first one that no longer fits the token budget.
pub fn fusion_top_k(candidates: &[ScoredChunk], store: &ChunkStore, c_token: u64) -> Result<Vec<String>> {
    let ordered = order_by_fusion(candidates, &candidates.iter().map(|c| c.chunk_id.clone()).collect::<Vec<_>>());
    let mut used = 0u64;
    let mut out = Vec::new();
    for id in ordered {
        let chunk = store
            .get(&id)
            .ok_or_else(|| Error::Validation(format!("candidate {id:?} not in store")))?;
        if used + chunk.token_len > c_token {
            break;
        }
        used += chunk.token_len;
        out.push(id);
    }
    Ok(out)
}

/// Maximal-marginal-relevance baseline under a token budget. Relevance is
/// the min-max normalized fusion score; novelty is the largest cosine to
/// anything already chosen. Output is in selection order.
pub fn mmr_select(
    candidates: &[ScoredChunk],
    store: &ChunkStore,
    lambda: f64,
    c_token: u64,
) -> Result<Vec<String>> {
    let rel = normalize_fusion(&candidates.iter().map(|c| c.fusion_score).collect::<Vec<_>>());
    let chunks = candidates
        .iter()
        .map(|c| {
            store
                .get(&c.chunk_id)
                .ok_or_else(|| Error::Validation(format!("candidate {:?} not in store", c.chunk_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut picked: Vec<usize> = Vec::new();
    let mut used = 0u64;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..candidates.len() {
            if picked.contains(&i) || used + chunks[i].token_len > c_token {
                continue;
            }
            let mut max_sim = 0.0f64;
            for &p in &picked {
                max_sim = max_sim.max(cosine(&chunks[i].embedding, &chunks[p].embedding)?);
            }
            let score = lambda * rel[i] - (1.0 - lambda) * max_sim;
            let better = match best {
                None => true,
                Some((bi, bs)) => {
                    score > bs || (score == bs && candidates[i].chunk_id < candidates[bi].chunk_id)
                }
            };
            if better {
                best = Some((i, score));
            }
        }
        let Some((i, _)) = best else { break };
        used += chunks[i].token_len;
        picked.push(i);
    }
    Ok(picked.into_iter().map(|i| candidates[i].chunk_id.clone()).collect())
}

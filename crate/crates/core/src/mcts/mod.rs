//! Answer search over (query, context, partial answer) states.
//!
//! Each simulation walks down the tree by PUCT, expands the first
//! non-terminal leaf it revisits into generate/augment children, rolls out
//! the new child greedily with the policy, scores the finished answer with
//! the entailment reward and averages that reward into every node on the
//! path. The root gets one rollout before the first simulation, so every
//! expanded node satisfies `visits = Σ child visits + 1`.

mod policy;

use std::collections::BTreeSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ChunkStore;
use crate::error::{Error, Result};
use crate::nli::{compute_reward, split_sentences, RewardWeights, Verifier};

pub use policy::{normalize_priors, ExtractivePolicy, PolicyOracle, Proposal, ScriptedPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerState {
    pub query: String,
    pub context_ids: BTreeSet<String>,
    pub partial_answer: String,
    pub depth: u32,
    /// The policy marked the answer finished.
    pub complete: bool,
}

impl PlannerState {
    pub fn new(query: impl Into<String>, context_ids: BTreeSet<String>) -> Self {
        Self {
            query: query.into(),
            context_ids,
            partial_answer: String::new(),
            depth: 0,
            complete: false,
        }
    }

    pub fn with_answer(mut self, answer: impl Into<String>) -> Self {
        self.partial_answer = answer.into();
        self
    }

    fn generate(&self, proposal: &Proposal) -> Self {
        let mut next = self.clone();
        if next.partial_answer.is_empty() {
            next.partial_answer = proposal.text.clone();
        } else {
            next.partial_answer.push(' ');
            next.partial_answer.push_str(&proposal.text);
        }
        next.depth += 1;
        next.complete = proposal.terminal;
        next
    }

    fn augment(&self, new_ids: &[String]) -> Self {
        let mut next = self.clone();
        next.context_ids.extend(new_ids.iter().cloned());
        next.depth += 1;
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Generate,
    Augment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerAction {
    pub kind: ActionKind,
    /// Continuation text for generate, retrieval query for augment.
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MctsNode {
    pub state: PlannerState,
    pub action: Option<PlannerAction>,
    pub prior: f64,
    pub visits: u32,
    pub q: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub expanded: bool,
}

/// Arena-backed search tree; node 0 is the root.
#[derive(Debug, Clone)]
pub struct MctsTree {
    nodes: Vec<MctsNode>,
}

impl MctsTree {
    pub fn new(root: PlannerState) -> Self {
        Self {
            nodes: vec![MctsNode {
                state: root,
                action: None,
                prior: 1.0,
                visits: 0,
                q: 0.0,
                parent: None,
                children: Vec::new(),
                expanded: false,
            }],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &MctsNode {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: usize) -> &mut MctsNode {
        &mut self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[MctsNode] {
        &self.nodes
    }

    pub fn add_child(&mut self, parent: usize, action: PlannerAction, prior: f64, state: PlannerState) -> usize {
        let id = self.nodes.len();
        self.nodes.push(MctsNode {
            state,
            action: Some(action),
            prior,
            visits: 0,
            q: 0.0,
            parent: Some(parent),
            children: Vec::new(),
            expanded: false,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn is_terminal(&self, id: usize, max_depth: u32) -> bool {
        let s = &self.nodes[id].state;
        s.complete || s.depth >= max_depth
    }

    pub fn stats(&self) -> TreeStats {
        let nodes: Vec<NodeStats> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| NodeStats {
                id,
                parent: n.parent,
                kind: n.action.as_ref().map(|a| a.kind),
                payload: n.action.as_ref().map(|a| a.payload.clone()),
                prior: n.prior,
                visits: n.visits,
                q: n.q,
                depth: n.state.depth,
                children: n.children.clone(),
            })
            .collect();
        TreeStats {
            visits: nodes.iter().map(|n| n.visits).collect(),
            q: nodes.iter().map(|n| n.q).collect(),
            nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub id: usize,
    pub parent: Option<usize>,
    pub kind: Option<ActionKind>,
    pub payload: Option<String>,
    pub prior: f64,
    pub visits: u32,
    pub q: f64,
    pub depth: u32,
    pub children: Vec<usize>,
}

/// Serializable snapshot of a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub nodes: Vec<NodeStats>,
    pub visits: Vec<u32>,
    pub q: Vec<f64>,
}

/// Scores a finished answer given the context it was produced under.
pub trait RewardFn {
    fn reward(&self, answer: &str, context_ids: &BTreeSet<String>) -> Result<f64>;
}

/// Entailment reward against the texts of the context chunks.
pub struct NliReward<'a> {
    pub store: &'a ChunkStore,
    pub verifier: &'a dyn Verifier,
    pub weights: RewardWeights,
}

impl RewardFn for NliReward<'_> {
    fn reward(&self, answer: &str, context_ids: &BTreeSet<String>) -> Result<f64> {
        let evidence: Vec<String> = context_ids
            .iter()
            .filter_map(|id| self.store.get(id).map(|c| c.text.clone()))
            .collect();
        compute_reward(answer, &evidence, &self.weights, self.verifier)
    }
}

/// Retrieval used by augment actions: ranked chunk ids for a query.
pub trait AugmentRetriever {
    fn retrieve(&self, query: &str) -> Result<Vec<String>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub n_sim: u32,
    /// Generate children per expansion.
    pub k: usize,
    /// Augment children per expansion (needs a retriever).
    pub m: usize,
    pub max_depth: u32,
    pub c_puct: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { n_sim: 24, k: 3, m: 1, max_depth: 3, c_puct: 1.4, seed: 0 }
    }
}

/// Oracles a search runs against.
pub struct SearchEnv<'a> {
    pub policy: &'a dyn PolicyOracle,
    pub reward: &'a dyn RewardFn,
    pub retriever: Option<&'a dyn AugmentRetriever>,
}

/// PUCT: argmax of `Q + c·P·√N(s)/(1 + N(s,a))`; lowest index wins ties.
pub fn select_child(tree: &MctsTree, id: usize, c_puct: f64) -> Result<usize> {
    let node = tree.node(id);
    if node.children.is_empty() {
        return Err(Error::Search(format!("node {id} has no children")));
    }
    let sqrt_n = f64::from(node.visits).sqrt();
    let mut best = node.children[0];
    let mut best_score = f64::NEG_INFINITY;
    for &c in &node.children {
        let child = tree.node(c);
        let score = child.q + c_puct * child.prior * sqrt_n / (1.0 + f64::from(child.visits));
        if score > best_score {
            best = c;
            best_score = score;
        }
    }
    Ok(best)
}

/// Running-mean update `Q ← (N·Q + R)/(N + 1)`, `N ← N + 1` for every node
/// on the path.
pub fn backpropagate(tree: &mut MctsTree, path: &[usize], reward: f64) {
    for &id in path {
        let n = tree.node_mut(id);
        let visits = f64::from(n.visits);
        n.q = (visits * n.q + reward) / (visits + 1.0);
        n.visits += 1;
    }
}

/// Augment queries append the last generated sentence to the user query.
fn augment_query(state: &PlannerState) -> String {
    match split_sentences(&state.partial_answer).last() {
        Some(last) => format!("{} {}", state.query, last),
        None => state.query.clone(),
    }
}

/// Adds `k` generate children from the policy and up to `m` augment
/// children, each of which adds one newly retrieved chunk to the context.
/// Augment children get the mean generate prior.
pub fn expand(
    tree: &mut MctsTree,
    id: usize,
    env: &SearchEnv<'_>,
    config: &SearchConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<usize>> {
    if tree.is_terminal(id, config.max_depth) {
        return Err(Error::Search(format!("cannot expand terminal node {id}")));
    }
    if tree.node(id).expanded {
        return Err(Error::Search(format!("node {id} is already expanded")));
    }
    let state = tree.node(id).state.clone();
    let mut proposals = env.policy.propose(&state, config.k, rng)?;
    proposals.retain(|p| !p.text.is_empty());
    proposals.truncate(config.k);

    let mut children = Vec::with_capacity(proposals.len() + config.m);
    for p in &proposals {
        let action = PlannerAction { kind: ActionKind::Generate, payload: p.text.clone() };
        children.push(tree.add_child(id, action, p.prior, state.generate(p)));
    }

    if config.m > 0 {
        if let Some(retriever) = env.retriever {
            let query = augment_query(&state);
            let prior = if proposals.is_empty() {
                1.0
            } else {
                proposals.iter().map(|p| p.prior).sum::<f64>() / proposals.len() as f64
            };
            let fresh: Vec<String> = retriever
                .retrieve(&query)?
                .into_iter()
                .filter(|c| !state.context_ids.contains(c))
                .take(config.m)
                .collect();
            for new_id in fresh {
                let action = PlannerAction { kind: ActionKind::Augment, payload: query.clone() };
                children.push(tree.add_child(id, action, prior, state.augment(&[new_id])));
            }
        }
    }
    tree.node_mut(id).expanded = true;
    Ok(children)
}

/// Greedy completion with the policy's highest-prior proposal.
fn complete_answer(
    state: &PlannerState,
    env: &SearchEnv<'_>,
    config: &SearchConfig,
    rng: &mut dyn RngCore,
) -> Result<PlannerState> {
    let mut s = state.clone();
    while !(s.complete || s.depth >= config.max_depth) {
        let proposals = env.policy.propose(&s, config.k.max(1), rng)?;
        let mut best: Option<&Proposal> = None;
        for p in proposals.iter().filter(|p| !p.text.is_empty()) {
            if best.is_none_or(|b| p.prior > b.prior) {
                best = Some(p);
            }
        }
        match best {
            Some(p) => s = s.generate(p),
            None => break,
        }
    }
    Ok(s)
}

/// Completes the node's answer greedily and scores it.
pub fn rollout(
    tree: &MctsTree,
    id: usize,
    env: &SearchEnv<'_>,
    config: &SearchConfig,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let done = complete_answer(&tree.node(id).state, env, config, rng)?;
    env.reward.reward(&done.partial_answer, &done.context_ids)
}

/// One simulation's root-to-leaf path and the reward sent up it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub path: Vec<usize>,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub answer: String,
    /// Context of the returned answer's state.
    pub context_ids: BTreeSet<String>,
    pub best_child: Option<usize>,
    pub tree: MctsTree,
    /// Root initialization first, then one record per simulation.
    pub trace: Vec<SimulationRecord>,
}

impl SearchOutcome {
    pub fn stats(&self) -> TreeStats {
        self.tree.stats()
    }
}

/// Robust child: most visits, then higher Q, then lower index.
fn robust_child(tree: &MctsTree, id: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &c in &tree.node(id).children {
        let better = match best {
            None => true,
            Some(b) => {
                let (nc, nb) = (tree.node(c), tree.node(b));
                nc.visits > nb.visits || (nc.visits == nb.visits && nc.q > nb.q)
            }
        };
        if better {
            best = Some(c);
        }
    }
    best
}

pub fn search(root: PlannerState, env: &SearchEnv<'_>, config: &SearchConfig) -> Result<SearchOutcome> {
    if config.n_sim == 0 {
        return Err(Error::InvalidArgument("n_sim must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tree = MctsTree::new(root);
    let mut trace = Vec::with_capacity(config.n_sim as usize + 1);

    let r0 = rollout(&tree, 0, env, config, &mut rng)?;
    backpropagate(&mut tree, &[0], r0);
    trace.push(SimulationRecord { path: vec![0], reward: r0 });

    for _ in 0..config.n_sim {
        let mut path = vec![0];
        let mut id = 0;
        loop {
            if tree.is_terminal(id, config.max_depth) {
                break;
            }
            if !tree.node(id).expanded {
                expand(&mut tree, id, env, config, &mut rng)?;
            }
            if tree.node(id).children.is_empty() {
                break;
            }
            id = select_child(&tree, id, config.c_puct)?;
            path.push(id);
            if tree.node(id).visits == 0 {
                break;
            }
        }
        let r = rollout(&tree, id, env, config, &mut rng)?;
        backpropagate(&mut tree, &path, r);
        trace.push(SimulationRecord { path, reward: r });
    }

    let best_child = robust_child(&tree, 0);
    let mut id = 0;
    while let Some(c) = robust_child(&tree, id) {
        id = c;
    }
    let done = complete_answer(&tree.node(id).state, env, config, &mut rng)?;
    Ok(SearchOutcome {
        answer: done.partial_answer,
        context_ids: done.context_ids,
        best_child,
        tree,
        trace,
    })
}

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{red_capacity_units, red_units, MmkpInstance, MmkpSolution};
use crate::error::Result;

/// Bookkeeping from one DP run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DpStats {
    /// Largest frontier held after any group.
    pub max_frontier: usize,
    /// Total candidate states generated before pruning.
    pub states_generated: usize,
}

/// Group-by-group dynamic program over (tokens, redundancy) states.
#[derive(Debug, Clone, Copy)]
pub struct ParetoDp {
    /// Drop dominated states after each group. Disabling keeps every
    /// feasible state and is only useful as a reference.
    pub prune: bool,
}

impl Default for ParetoDp {
    fn default() -> Self {
        Self { prune: true }
    }
}

#[derive(Debug, Clone)]
struct State {
    tokens: u64,
    red: u64,
    value: f64,
    /// Ranks of the selected ids (in group order) within the instance's
    /// sorted id list; comparing these compares the id lists.
    ranks: Vec<u32>,
    picks: Vec<Option<u16>>,
}

impl State {
    /// `Greater` when `self` is the preferred solution.
    fn quality_cmp(&self, other: &State) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.ranks.len().cmp(&self.ranks.len()))
            .then_with(|| other.ranks.cmp(&self.ranks))
    }
}

pub fn solve_pareto_dp(instance: &MmkpInstance) -> Result<MmkpSolution> {
    ParetoDp::default().solve(instance).map(|(s, _)| s)
}

impl ParetoDp {
    pub fn solve(&self, instance: &MmkpInstance) -> Result<(MmkpSolution, DpStats)> {
        instance.validate()?;
        let cap_tokens = instance.capacity.token;
        let cap_red = red_capacity_units(instance.capacity.red);

        let mut all_ids: Vec<&str> = instance
            .groups
            .iter()
            .flat_map(|g| g.items.iter().map(|i| i.chunk_id.as_str()))
            .collect();
        all_ids.sort_unstable();
        all_ids.dedup();
        let rank_of = |id: &str| all_ids.binary_search(&id).expect("id collected above") as u32;

        let mut stats = DpStats::default();
        let mut frontier = vec![State {
            tokens: 0,
            red: 0,
            value: 0.0,
            ranks: Vec::new(),
            picks: Vec::new(),
        }];

        for g in &instance.groups {
            let mut next: Vec<State> = Vec::with_capacity(frontier.len() * (g.items.len() + 1));
            for s in &frontier {
                let mut skip = s.clone();
                skip.picks.push(None);
                next.push(skip);
            }
            for (j, item) in g.items.iter().enumerate() {
                let w_tok = item.cost.token;
                let w_red = red_units(item.cost.red);
                let rank = rank_of(&item.chunk_id);
                for s in &frontier {
                    let tokens = s.tokens.saturating_add(w_tok);
                    let red = s.red.saturating_add(w_red);
                    if tokens > cap_tokens || red > cap_red {
                        continue;
                    }
                    let mut ranks = s.ranks.clone();
                    ranks.push(rank);
                    let mut picks = s.picks.clone();
                    picks.push(Some(j as u16));
                    next.push(State { tokens, red, value: s.value + item.value, ranks, picks });
                }
            }
            stats.states_generated += next.len();
            frontier = if self.prune { prune_dominated(next) } else { next };
            stats.max_frontier = stats.max_frontier.max(frontier.len());
        }

        let best = frontier
            .into_iter()
            .max_by(|a, b| a.quality_cmp(b))
            .expect("frontier always holds the empty selection");
        let picks = best.picks.iter().map(|p| p.map(usize::from)).collect();
        Ok((instance.solution_from_picks(picks), stats))
    }
}

/// Keeps the states not dominated by another: a state goes when some other
/// state costs no more in both dimensions and is at least as preferable
/// (value first, then the selection tie-break).
fn prune_dominated(mut states: Vec<State>) -> Vec<State> {
    // after this sort any dominator of a state precedes it
    states.sort_by(|a, b| {
        a.tokens
            .cmp(&b.tokens)
            .then_with(|| a.red.cmp(&b.red))
            .then_with(|| b.quality_cmp(a))
    });

    let mut kept: Vec<State> = Vec::with_capacity(states.len());
    // staircase over kept states: red -> index into kept, quality strictly
    // increasing with red
    let mut stairs: BTreeMap<u64, usize> = BTreeMap::new();
    for s in states {
        if let Some((_, &k)) = stairs.range(..=s.red).next_back() {
            if kept[k].quality_cmp(&s) != Ordering::Less {
                continue;
            }
        }
        let doomed: Vec<u64> = stairs
            .range(s.red..)
            .take_while(|(_, &k)| kept[k].quality_cmp(&s) != Ordering::Greater)
            .map(|(&r, _)| r)
            .collect();
        for r in doomed {
            stairs.remove(&r);
        }
        stairs.insert(s.red, kept.len());
        kept.push(s);
    }
    kept
}

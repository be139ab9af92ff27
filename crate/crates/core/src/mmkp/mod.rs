//! Context selection as a multiple-choice multidimensional knapsack.
//!
//! Candidates are clustered into groups of near-duplicates; at most one item
//! may be taken from each group, and the selection must fit a two-dimensional
//! budget of (tokens, redundancy). Three solvers are provided: exhaustive
//! enumeration (the reference), a Pareto-pruned dynamic program (the one
//! used in the pipeline), and an FPTAS for the single-dimension,
//! singleton-group special case.
//!
//! Redundancy costs are handled at a resolution of 0.01: item costs are
//! rounded to two decimals and the redundancy capacity is floored to the
//! same grid, so every solver works on exact integer sums.

mod build;
mod exact;
mod fptas;
pub mod gen;
mod pareto;
mod reduction;
mod select;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use build::{group_chunks, group_vectors, item_costs, item_utility, normalize_fusion};
pub use exact::{solve_exact, EXACT_COMBINATION_LIMIT};
pub use fptas::{fptas_knapsack, FptasSolution};
pub use pareto::{solve_pareto_dp, DpStats, ParetoDp};
pub use reduction::reduce_knapsack_to_mmkp;
pub use select::{fusion_top_k, mmr_select, select_context, ContextSelection, MmkpParams};

/// Finite stand-in for an unbounded capacity component.
pub const UNBOUNDED_RED: f64 = f64::MAX;
pub const UNBOUNDED_TOKENS: u64 = u64::MAX;

/// A (tokens, redundancy) pair. Serialized as `[int, float]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u64, f64)", into = "(u64, f64)")]
pub struct Cost {
    pub token: u64,
    pub red: f64,
}

impl Cost {
    pub const ZERO: Cost = Cost { token: 0, red: 0.0 };

    pub fn new(token: u64, red: f64) -> Self {
        Self { token, red }
    }

    pub fn unbounded() -> Self {
        Self { token: UNBOUNDED_TOKENS, red: UNBOUNDED_RED }
    }
}

impl From<(u64, f64)> for Cost {
    fn from((token, red): (u64, f64)) -> Self {
        Self { token, red }
    }
}

impl From<Cost> for (u64, f64) {
    fn from(c: Cost) -> Self {
        (c.token, c.red)
    }
}

/// Rounds a redundancy cost to two decimals.
pub fn quantize_red(red: f64) -> f64 {
    (red * 100.0).round() / 100.0
}

/// Item redundancy cost in hundredths, saturating.
pub(crate) fn red_units(red: f64) -> u64 {
    let scaled = (red * 100.0).round();
    if scaled.is_nan() || scaled <= 0.0 {
        0
    } else if scaled >= u64::MAX as f64 {
        u64::MAX
    } else {
        scaled as u64
    }
}

/// Redundancy capacity in hundredths, rounded down.
pub(crate) fn red_capacity_units(red: f64) -> u64 {
    // tolerate representation error such as 120.0 * 100 = 11999.999...
    let scaled = (red * 100.0 + 1e-9).floor();
    if scaled.is_nan() || scaled <= 0.0 {
        0
    } else if scaled >= u64::MAX as f64 {
        u64::MAX
    } else {
        scaled as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub index: usize,
    pub member_ids: Vec<String>,
    /// Unit-norm mean of the member embeddings. Empty for synthetic instances.
    #[serde(default)]
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmkpItem {
    pub chunk_id: String,
    pub group_index: usize,
    pub value: f64,
    pub cost: Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupItems {
    #[serde(flatten)]
    pub group: Group,
    pub items: Vec<MmkpItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmkpInstance {
    pub groups: Vec<GroupItems>,
    pub capacity: Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmkpSolution {
    /// Selected chunk ids in group order.
    pub selected: Vec<String>,
    pub total_value: f64,
    pub total_cost: Cost,
    /// Chosen item index per group, `None` when the group is skipped.
    pub picks: Vec<Option<usize>>,
}

impl MmkpInstance {
    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let cap = self.capacity;
        if cap.red.is_nan() || cap.red < 0.0 {
            return Err(Error::Validation(format!("capacity redundancy {} is negative", cap.red)));
        }
        for (gi, g) in self.groups.iter().enumerate() {
            for item in &g.items {
                if item.group_index != gi {
                    return Err(Error::Validation(format!(
                        "item {:?} has group_index {} but sits in group {gi}",
                        item.chunk_id, item.group_index
                    )));
                }
                if !item.value.is_finite() || item.value < 0.0 {
                    return Err(Error::Validation(format!(
                        "item {:?} has invalid value {}",
                        item.chunk_id, item.value
                    )));
                }
                if item.cost.red.is_nan() || item.cost.red < 0.0 {
                    return Err(Error::Validation(format!(
                        "item {:?} has invalid redundancy cost {}",
                        item.chunk_id, item.cost.red
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn item_count(&self) -> usize {
        self.groups.iter().map(|g| g.items.len()).sum()
    }

    /// Builds the solution record for a pick vector, summing values in group order.
    pub fn solution_from_picks(&self, picks: Vec<Option<usize>>) -> MmkpSolution {
        let mut total_value = 0.0;
        let mut tokens: u64 = 0;
        let mut red: u64 = 0;
        let mut selected = Vec::new();
        for (g, pick) in self.groups.iter().zip(&picks) {
            if let Some(j) = pick {
                let item = &g.items[*j];
                total_value += item.value;
                tokens = tokens.saturating_add(item.cost.token);
                red = red.saturating_add(red_units(item.cost.red));
                selected.push(item.chunk_id.clone());
            }
        }
        MmkpSolution {
            selected,
            total_value,
            total_cost: Cost::new(tokens, red as f64 / 100.0),
            picks,
        }
    }

    /// Checks the budget and multiple-choice constraints for a solution.
    pub fn check_feasible(&self, sol: &MmkpSolution) -> Result<()> {
        if sol.picks.len() != self.groups.len() {
            return Err(Error::Validation(format!(
                "solution covers {} groups, instance has {}",
                sol.picks.len(),
                self.groups.len()
            )));
        }
        let mut tokens: u64 = 0;
        let mut red: u64 = 0;
        let mut value = 0.0;
        let mut ids = Vec::new();
        for (gi, (g, pick)) in self.groups.iter().zip(&sol.picks).enumerate() {
            if let Some(j) = pick {
                let item = g.items.get(*j).ok_or_else(|| {
                    Error::Validation(format!("group {gi} has no item {j}"))
                })?;
                tokens = tokens.saturating_add(item.cost.token);
                red = red.saturating_add(red_units(item.cost.red));
                value += item.value;
                ids.push(item.chunk_id.as_str());
            }
        }
        if tokens > self.capacity.token || red > red_capacity_units(self.capacity.red) {
            return Err(Error::Validation(format!(
                "cost ({tokens}, {}) exceeds capacity ({}, {})",
                red as f64 / 100.0,
                self.capacity.token,
                self.capacity.red
            )));
        }
        if ids != sol.selected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Validation("selected ids do not match picks".into()));
        }
        if value != sol.total_value {
            return Err(Error::Validation(format!(
                "total value {} does not match picks ({value})",
                sol.total_value
            )));
        }
        let mut per_group = vec![0usize; self.groups.len()];
        for id in &sol.selected {
            for (gi, g) in self.groups.iter().enumerate() {
                if g.items.iter().any(|it| &it.chunk_id == id) {
                    per_group[gi] += 1;
                }
            }
        }
        if let Some(gi) = per_group.iter().position(|&c| c > 1) {
            return Err(Error::Validation(format!("group {gi} has more than one selection")));
        }
        Ok(())
    }
}

/// Solution preference: higher value, then fewer items, then the
/// lexicographically smaller id list (ids in group order).
/// `Ordering::Greater` means `a` is preferred.
pub(crate) fn prefer<S: AsRef<str>>(
    a_value: f64,
    a_ids: &[S],
    b_value: f64,
    b_ids: &[S],
) -> Ordering {
    a_value
        .total_cmp(&b_value)
        .then_with(|| b_ids.len().cmp(&a_ids.len()))
        .then_with(|| {
            let a = a_ids.iter().map(AsRef::as_ref);
            let b = b_ids.iter().map(AsRef::as_ref);
            b.cmp(a)
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy() -> MmkpInstance {
        let item = |id: &str, g, v, t| MmkpItem {
            chunk_id: id.into(),
            group_index: g,
            value: v,
            cost: Cost::new(t, 0.0),
        };
        MmkpInstance {
            groups: vec![
                GroupItems {
                    group: Group { index: 0, member_ids: vec!["a".into(), "b".into()], centroid: vec![] },
                    items: vec![item("a", 0, 3.0, 5), item("b", 0, 2.0, 1)],
                },
                GroupItems {
                    group: Group { index: 1, member_ids: vec!["c".into()], centroid: vec![] },
                    items: vec![item("c", 1, 4.0, 5)],
                },
            ],
            capacity: Cost::new(6, UNBOUNDED_RED),
        }
    }

    #[test]
    fn json_shape_round_trips() {
        let inst = toy();
        let json = inst.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["capacity"][0], 6);
        assert_eq!(v["groups"][0]["items"][1]["cost"], serde_json::json!([1, 0.0]));
        assert_eq!(MmkpInstance::from_json(&json).unwrap(), inst);
    }

    #[test]
    fn validation_catches_misplaced_item() {
        let mut inst = toy();
        inst.groups[1].items[0].group_index = 0;
        assert!(inst.validate().is_err());
    }

    #[test]
    fn capacity_units_absorb_float_error() {
        assert_eq!(red_capacity_units(120.0), 12000);
        assert_eq!(red_capacity_units(0.29), 29);
        assert_eq!(red_capacity_units(UNBOUNDED_RED), u64::MAX);
        assert_eq!(red_units(90.00000000000001), 9000);
        assert_eq!(quantize_red(33.333333), 33.33);
    }

    #[test]
    fn preference_order() {
        assert_eq!(prefer(2.0, &["a"], 1.0, &["a", "b"]), Ordering::Greater);
        assert_eq!(prefer(2.0, &["a"], 2.0, &["a", "b"]), Ordering::Greater);
        assert_eq!(prefer(2.0, &["a", "c"], 2.0, &["a", "b"]), Ordering::Less);
        assert_eq!(prefer::<&str>(0.0, &[], 0.0, &[]), Ordering::Equal);
    }

    #[test]
    fn infeasible_solution_detected() {
        let inst = toy();
        let sol = inst.solution_from_picks(vec![Some(0), Some(0)]);
        assert!(inst.check_feasible(&sol).is_err());
        let ok = inst.solution_from_picks(vec![Some(1), Some(0)]);
        inst.check_feasible(&ok).unwrap();
    }
}

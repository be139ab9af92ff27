use std::cmp::Ordering;

use super::{prefer, red_capacity_units, red_units, MmkpInstance, MmkpSolution};
use crate::error::{Error, Result};

/// Upper bound on Π(|G_i| + 1) accepted by [`solve_exact`].
pub const EXACT_COMBINATION_LIMIT: u128 = 1 << 24;

/// Exhaustive search over every feasible choice, skip included.
///
/// Partial selections that already exceed the budget are cut, since costs
/// are non-negative and cannot recover.
pub fn solve_exact(instance: &MmkpInstance) -> Result<MmkpSolution> {
    instance.validate()?;
    let combinations = instance
        .groups
        .iter()
        .fold(1u128, |acc, g| acc.saturating_mul(g.items.len() as u128 + 1));
    if combinations > EXACT_COMBINATION_LIMIT {
        return Err(Error::SizeGuard { combinations, limit: EXACT_COMBINATION_LIMIT });
    }

    let mut search = Search {
        instance,
        cap_tokens: instance.capacity.token,
        cap_red: red_capacity_units(instance.capacity.red),
        picks: Vec::with_capacity(instance.groups.len()),
        ids: Vec::with_capacity(instance.groups.len()),
        best_value: f64::NEG_INFINITY,
        best_ids: Vec::new(),
        best_picks: Vec::new(),
    };
    search.descend(0, 0.0, 0, 0);
    Ok(instance.solution_from_picks(search.best_picks))
}

struct Search<'a> {
    instance: &'a MmkpInstance,
    cap_tokens: u64,
    cap_red: u64,
    picks: Vec<Option<usize>>,
    ids: Vec<&'a str>,
    best_value: f64,
    best_ids: Vec<&'a str>,
    best_picks: Vec<Option<usize>>,
}

impl<'a> Search<'a> {
    fn descend(&mut self, group: usize, value: f64, tokens: u64, red: u64) {
        let instance = self.instance;
        if group == instance.groups.len() {
            if prefer(value, &self.ids, self.best_value, &self.best_ids) == Ordering::Greater {
                self.best_value = value;
                self.best_ids.clone_from(&self.ids);
                self.best_picks.clone_from(&self.picks);
            }
            return;
        }
        self.picks.push(None);
        self.descend(group + 1, value, tokens, red);
        self.picks.pop();

        for (j, item) in instance.groups[group].items.iter().enumerate() {
            let t = tokens.saturating_add(item.cost.token);
            let r = red.saturating_add(red_units(item.cost.red));
            if t > self.cap_tokens || r > self.cap_red {
                continue;
            }
            self.picks.push(Some(j));
            self.ids.push(&item.chunk_id);
            self.descend(group + 1, value + item.value, t, r);
            self.ids.pop();
            self.picks.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmkp::{Cost, Group, GroupItems, MmkpItem, UNBOUNDED_RED};

    fn item(id: &str, g: usize, v: f64, t: u64) -> MmkpItem {
        MmkpItem { chunk_id: id.into(), group_index: g, value: v, cost: Cost::new(t, 0.0) }
    }

    fn group(index: usize, items: Vec<MmkpItem>) -> GroupItems {
        GroupItems {
            group: Group {
                index,
                member_ids: items.iter().map(|i| i.chunk_id.clone()).collect(),
                centroid: vec![],
            },
            items,
        }
    }

    pub(crate) fn worked_example() -> MmkpInstance {
        MmkpInstance {
            groups: vec![
                group(0, vec![item("v3", 0, 3.0, 5), item("v2", 0, 2.0, 1)]),
                group(1, vec![item("v4", 1, 4.0, 5)]),
            ],
            capacity: Cost::new(6, UNBOUNDED_RED),
        }
    }

    #[test]
    fn worked_example_picks_cheaper_pair() {
        // the six combinations: {}, {v3}, {v2}, {v4}, {v3,v4}=10 tokens, {v2,v4}
        let sol = solve_exact(&worked_example()).unwrap();
        assert_eq!(sol.selected, vec!["v2", "v4"]);
        assert_eq!(sol.total_value, 6.0);
        assert_eq!(sol.total_cost, Cost::new(6, 0.0));
    }

    #[test]
    fn zero_capacity_selects_nothing() {
        let mut inst = worked_example();
        inst.capacity = Cost::new(0, 0.0);
        let sol = solve_exact(&inst).unwrap();
        assert!(sol.selected.is_empty());
        assert_eq!(sol.total_value, 0.0);
    }

    #[test]
    fn single_affordable_item() {
        let inst = MmkpInstance {
            groups: vec![group(0, vec![item("x", 0, 1.5, 3)])],
            capacity: Cost::new(3, 0.0),
        };
        assert_eq!(solve_exact(&inst).unwrap().selected, vec!["x"]);
    }

    #[test]
    fn redundancy_budget_binds() {
        let mut inst = worked_example();
        inst.capacity = Cost::new(100, 0.5);
        inst.groups[1].items[0].cost.red = 0.51;
        let sol = solve_exact(&inst).unwrap();
        assert_eq!(sol.selected, vec!["v3"]);
    }

    #[test]
    fn ties_prefer_fewer_items_then_smaller_ids() {
        let inst = MmkpInstance {
            groups: vec![
                group(0, vec![item("b", 0, 1.0, 1), item("a", 0, 1.0, 1)]),
                group(1, vec![item("z", 1, 0.0, 0)]),
            ],
            capacity: Cost::new(10, 0.0),
        };
        let sol = solve_exact(&inst).unwrap();
        assert_eq!(sol.selected, vec!["a"]);
    }

    #[test]
    fn size_guard() {
        let groups = (0..13)
            .map(|g| group(g, (0..4).map(|j| item(&format!("g{g}i{j}"), g, 1.0, 1)).collect()))
            .collect();
        let inst = MmkpInstance { groups, capacity: Cost::new(10, 0.0) };
        assert!(matches!(solve_exact(&inst), Err(Error::SizeGuard { .. })));
    }
}

use super::{Cost, Group, GroupItems, MmkpInstance, MmkpItem, UNBOUNDED_RED};

/// Encodes a 0/1 knapsack as an MMKP: one group per item holding the real
/// item (cost `(w_i, 0)`) and a zero-value, zero-cost dummy, with the
/// redundancy dimension left unbounded.
pub fn reduce_knapsack_to_mmkp(values: &[f64], weights: &[u64], capacity: u64) -> MmkpInstance {
    assert_eq!(values.len(), weights.len(), "values and weights must align");
    let groups = values
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (&v, &w))| {
            let take = format!("k{i}");
            let leave = format!("k{i}_skip");
            GroupItems {
                group: Group {
                    index: i,
                    member_ids: vec![take.clone(), leave.clone()],
                    centroid: vec![],
                },
                items: vec![
                    MmkpItem { chunk_id: take, group_index: i, value: v, cost: Cost::new(w, 0.0) },
                    MmkpItem { chunk_id: leave, group_index: i, value: 0.0, cost: Cost::ZERO },
                ],
            }
        })
        .collect();
    MmkpInstance { groups, capacity: Cost::new(capacity, UNBOUNDED_RED) }
}

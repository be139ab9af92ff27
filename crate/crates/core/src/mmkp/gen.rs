//! Seeded random instance generators for solver testing and benchmarking.

use rand::Rng;

use super::{exact::EXACT_COMBINATION_LIMIT, Cost, Group, GroupItems, MmkpInstance, MmkpItem};

#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub max_groups: usize,
    pub max_items: usize,
    pub max_token_cost: u64,
    /// Redundancy costs are drawn from {0, 0.01, ..., max_red}.
    pub max_red: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self { max_groups: 12, max_items: 4, max_token_cost: 50, max_red: 100.0 }
    }
}

/// Draws an instance with 1..=max_groups groups of 1..=max_items items.
/// Capacities are drawn as a fraction of the per-dimension total so that
/// instances range from tight to loose. Shapes whose choice count would
/// exceed the exhaustive solver's limit are redrawn.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, shape: &InstanceShape) -> MmkpInstance {
    loop {
        let n_groups = rng.gen_range(1..=shape.max_groups);
        let sizes: Vec<usize> = (0..n_groups).map(|_| rng.gen_range(1..=shape.max_items)).collect();
        let combos = sizes.iter().fold(1u128, |a, &s| a.saturating_mul(s as u128 + 1));
        if combos > EXACT_COMBINATION_LIMIT {
            continue;
        }
        let max_red_units = (shape.max_red * 100.0).round() as u64;
        let mut total_tok = 0u64;
        let mut total_red = 0u64;
        let groups: Vec<GroupItems> = sizes
            .iter()
            .enumerate()
            .map(|(g, &size)| {
                let items: Vec<MmkpItem> = (0..size)
                    .map(|j| {
                        let token = rng.gen_range(0..=shape.max_token_cost);
                        let red_units = rng.gen_range(0..=max_red_units);
                        total_tok += token;
                        total_red += red_units;
                        MmkpItem {
                            chunk_id: format!("g{g:02}i{j}"),
                            group_index: g,
                            value: rng.gen_range(0.0..10.0),
                            cost: Cost::new(token, red_units as f64 / 100.0),
                        }
                    })
                    .collect();
                GroupItems {
                    group: Group {
                        index: g,
                        member_ids: items.iter().map(|i| i.chunk_id.clone()).collect(),
                        centroid: vec![],
                    },
                    items,
                }
            })
            .collect();
        let tok_frac: f64 = rng.gen_range(0.05..0.6);
        let red_frac: f64 = rng.gen_range(0.05..0.6);
        let capacity = Cost::new(
            (total_tok as f64 * tok_frac).round() as u64,
            ((total_red as f64 * red_frac).round()) / 100.0,
        );
        return MmkpInstance { groups, capacity };
    }
}

/// Random 0/1 knapsack: positive real values, integer weights.
pub fn random_knapsack<R: Rng + ?Sized>(rng: &mut R, max_n: usize) -> (Vec<f64>, Vec<u64>, u64) {
    let n = rng.gen_range(1..=max_n);
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..100.0)).collect();
    let weights: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=40)).collect();
    let total: u64 = weights.iter().sum();
    let cap = rng.gen_range(0..=total);
    (values, weights, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_instances_validate_and_respect_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = InstanceShape::default();
        for _ in 0..50 {
            let inst = random_instance(&mut rng, &shape);
            inst.validate().unwrap();
            assert!(inst.groups.len() <= 12);
            assert!(inst.groups.iter().all(|g| (1..=4).contains(&g.items.len())));
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = random_instance(&mut ChaCha8Rng::seed_from_u64(9), &InstanceShape::default());
        let b = random_instance(&mut ChaCha8Rng::seed_from_u64(9), &InstanceShape::default());
        assert_eq!(a, b);
    }
}

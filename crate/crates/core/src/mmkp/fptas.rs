use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FptasSolution {
    /// Indices into the input, ascending.
    pub selected: Vec<usize>,
    pub value: f64,
    pub weight: f64,
}

/// Value-scaling approximation scheme for 0/1 knapsack.
///
/// Items heavier than the capacity are discarded first; on the rest values
/// are scaled by `K = eps * P / n` (P the largest remaining value, n the
/// remaining count) and floored, then a min-weight table over scaled value
/// is filled. The returned set has true value at least `(1 - eps) * OPT`.
pub fn fptas_knapsack(
    values: &[f64],
    weights: &[f64],
    capacity: f64,
    eps: f64,
) -> Result<FptasSolution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("need at least one item".into()));
    }
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch { left: values.len(), right: weights.len() });
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!("values must be positive, got {v}")));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidArgument(format!("weights must be non-negative, got {w}")));
    }

    let fitting: Vec<usize> = (0..values.len()).filter(|&i| weights[i] <= capacity).collect();
    if fitting.is_empty() {
        return Ok(FptasSolution { selected: vec![], value: 0.0, weight: 0.0 });
    }

    let n = fitting.len();
    let p_max = fitting.iter().map(|&i| values[i]).fold(0.0, f64::max);
    let k = eps * p_max / n as f64;
    let scaled: Vec<usize> = fitting.iter().map(|&i| (values[i] / k).floor() as usize).collect();
    let v_max: usize = scaled.iter().sum();

    let mut table = vec![f64::INFINITY; v_max + 1];
    table[0] = 0.0;
    let mut took = vec![vec![false; v_max + 1]; n];
    for (row, (&item, &sv)) in fitting.iter().zip(&scaled).enumerate() {
        if sv == 0 {
            continue;
        }
        let w = weights[item];
        for p in (sv..=v_max).rev() {
            let cand = table[p - sv] + w;
            if cand < table[p] {
                table[p] = cand;
                took[row][p] = true;
            }
        }
    }

    let best_p = (0..=v_max).rev().find(|&p| table[p] <= capacity).unwrap_or(0);
    let mut selected = Vec::new();
    let mut p = best_p;
    for row in (0..n).rev() {
        if took[row][p] {
            selected.push(fitting[row]);
            p -= scaled[row];
        }
    }
    selected.sort_unstable();
    let value = selected.iter().map(|&i| values[i]).sum();
    let weight = selected.iter().map(|&i| weights[i]).sum();
    Ok(FptasSolution { selected, value, weight })
}

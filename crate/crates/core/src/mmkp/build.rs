use super::{quantize_red, Cost, Group};
use crate::corpus::{normalize_or_basis, Chunk, ChunkStore};
use crate::error::{Error, Result};
use crate::retrieval::{cosine, ScoredChunk};

/// Greedy centroid clustering. Items are taken in the given order; each
/// joins the first group whose centroid has cosine ≥ `tau` with it, or
/// seeds a new group. Centroids are refreshed after every assignment.
pub fn group_vectors(items: &[(&str, &[f64])], tau: f64) -> Result<Vec<Group>> {
    let mut groups: Vec<Group> = Vec::new();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    for &(id, v) in items {
        let mut home = None;
        for (gi, g) in groups.iter().enumerate() {
            if cosine(v, &g.centroid)? >= tau {
                home = Some(gi);
                break;
            }
        }
        match home {
            Some(gi) => {
                sums[gi].iter_mut().zip(v).for_each(|(s, x)| *s += x);
                let mut c = sums[gi].clone();
                normalize_or_basis(&mut c);
                groups[gi].centroid = c;
                groups[gi].member_ids.push(id.to_string());
            }
            None => {
                let mut c = v.to_vec();
                normalize_or_basis(&mut c);
                groups.push(Group { index: groups.len(), member_ids: vec![id.to_string()], centroid: c });
                sums.push(v.to_vec());
            }
        }
    }
    Ok(groups)
}

/// Sorts candidates by descending fusion score (ties by id) and clusters
/// their embeddings with [`group_vectors`].
pub fn group_chunks(candidates: &[ScoredChunk], store: &ChunkStore, tau: f64) -> Result<Vec<Group>> {
    let mut ordered: Vec<&ScoredChunk> = candidates.iter().collect();
    ordered.sort_by(|a, b| {
        b.fusion_score
            .total_cmp(&a.fusion_score)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    let items = ordered
        .iter()
        .map(|c| {
            store
                .get(&c.chunk_id)
                .map(|chunk| (c.chunk_id.as_str(), chunk.embedding.as_slice()))
                .ok_or_else(|| Error::Validation(format!("candidate {:?} not in store", c.chunk_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    group_vectors(&items, tau)
}

/// Min-max normalizes fusion scores to [0, 1]. A constant list maps to 1.
pub fn normalize_fusion(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    scores
        .iter()
        .map(|&s| if range > 0.0 { (s - lo) / range } else { 1.0 })
        .collect()
}

/// `alpha * fusion + beta * (1 - cos(chunk, centroid))`, floored at zero.
/// `fusion` is expected to be already normalized.
pub fn item_utility(
    fusion: f64,
    chunk_vec: &[f64],
    centroid: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let sim = cosine(chunk_vec, centroid)?;
    Ok((alpha * fusion + beta * (1.0 - sim)).max(0.0))
}

/// Token cost and redundancy cost of a chunk within its group. The
/// redundancy cost is `lambda_red` times the mean cosine to the other
/// members, zero for singletons, floored at zero and rounded to 0.01.
pub fn item_costs(chunk: &Chunk, group: &Group, store: &ChunkStore, lambda_red: f64) -> Result<Cost> {
    if !group.member_ids.iter().any(|m| m == &chunk.id) {
        return Err(Error::Validation(format!(
            "chunk {:?} is not a member of group {}",
            chunk.id, group.index
        )));
    }
    let mut total = 0.0;
    let mut others = 0usize;
    for m in group.member_ids.iter().filter(|m| *m != &chunk.id) {
        let other = store
            .get(m)
            .ok_or_else(|| Error::Validation(format!("group member {m:?} not in store")))?;
        total += cosine(&chunk.embedding, &other.embedding)?;
        others += 1;
    }
    let red = if others == 0 { 0.0 } else { lambda_red * total / others as f64 };
    Ok(Cost::new(chunk.token_len, quantize_red(red.max(0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;

    fn chunk(id: &str, v: Vec<f64>, tokens: u64) -> Chunk {
        Chunk { id: id.into(), text: String::new(), token_len: tokens, embedding: v, terms: Default::default() }
    }

    #[test]
    fn greedy_assignment_hand_trace() {
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![0.9, (1.0f64 - 0.81).sqrt(), 0.0];
        let c = vec![0.1, 0.0, (1.0f64 - 0.01).sqrt()];
        let groups = group_vectors(&[("A", &a), ("B", &b), ("C", &c)], 0.82).unwrap();
        let members: Vec<Vec<&str>> =
            groups.iter().map(|g| g.member_ids.iter().map(String::as_str).collect()).collect();
        assert_eq!(members, vec![vec!["A", "B"], vec!["C"]]);
        for g in &groups {
            let n: f64 = g.centroid.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_one_gives_singletons() {
        let s = 0.5f64.sqrt();
        let vs = [vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]];
        let items: Vec<(&str, &[f64])> =
            vec![("x", &vs[0][..]), ("y", &vs[1][..]), ("z", &vs[2][..])];
        assert_eq!(group_vectors(&items, 1.0).unwrap().len(), 3);
    }

    #[test]
    fn singleton_centroid_is_the_embedding() {
        let v = vec![0.6, 0.8];
        let groups = group_vectors(&[("only", &v)], 0.82).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].centroid, v);
    }

    #[test]
    fn utility_examples() {
        let v = [1.0, 0.0];
        let u = item_utility(1.0, &v, &v, 0.7, 0.3).unwrap();
        assert!((u - 0.70).abs() < 1e-12);
        assert_eq!(item_utility(0.0, &v, &v, 0.7, 0.3).unwrap(), 0.0);
        let u = item_utility(0.5, &[1.0, 0.0], &[0.0, 1.0], 0.7, 0.3).unwrap();
        assert!((u - 0.65).abs() < 1e-12);
    }

    #[test]
    fn normalization_edges() {
        let n = normalize_fusion(&[0.2, 0.1, 0.3]);
        for (a, b) in n.iter().zip([0.5, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(normalize_fusion(&[0.03]), vec![1.0]);
        assert!(normalize_fusion(&[]).is_empty());
    }

    #[test]
    fn cost_examples() {
        let a = chunk("a", vec![1.0, 0.0], 37);
        let b = chunk("b", vec![0.9, (1.0f64 - 0.81).sqrt()], 10);
        let store = ChunkStore::new(vec![a.clone(), b], 2).unwrap();
        let single = Group { index: 0, member_ids: vec!["a".into()], centroid: vec![1.0, 0.0] };
        assert_eq!(item_costs(&a, &single, &store, 100.0).unwrap(), Cost::new(37, 0.0));
        let pair = Group { index: 0, member_ids: vec!["a".into(), "b".into()], centroid: vec![] };
        let c = item_costs(&a, &pair, &store, 100.0).unwrap();
        assert_eq!(c.token, 37);
        assert!((c.red - 90.0).abs() < 1e-9);
        let stranger = Group { index: 1, member_ids: vec!["b".into()], centroid: vec![] };
        assert!(item_costs(&a, &stranger, &store, 100.0).is_err());
    }
}

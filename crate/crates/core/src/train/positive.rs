//! Positive-pair selection: each anchor draws uniformly from its few spectrally
//! nearest same-family neighbors instead of being perturbed, since small graph
//! edits can change accuracy drastically or leave the family altogether.

use crate::rng::{uniform_usize, ChaCha8Rng};
use crate::spectral::DistanceCache;

/// The `pool_size` nearest neighbors of `anchor` within its dataset, by cached
/// spectral distance, self excluded, ties broken by index.
pub fn nearest_neighbors(cache: &DistanceCache, anchor: usize, pool_size: usize) -> Vec<usize> {
    let mut candidates: Vec<(f64, usize)> = (0..cache.n())
        .filter(|&j| j != anchor)
        .map(|j| (cache.get(anchor, j), j))
        .collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    candidates
        .into_iter()
        .take(pool_size)
        .map(|(_, j)| j)
        .collect()
}

/// Uniform choice among the anchor's candidate neighbors.
pub fn select_positive(neighbors: &[usize], rng: &mut ChaCha8Rng) -> usize {
    assert!(!neighbors.is_empty(), "positive selection needs neighbors");
    neighbors[uniform_usize(rng, neighbors.len())]
}

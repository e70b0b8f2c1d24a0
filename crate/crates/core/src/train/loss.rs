//! Contrastive agreement and the three losses built on it.
//!
//! The agreement between batch members i and j is the log-probability of j under
//! a temperature-scaled softmax of i's cosine similarities over all non-anchor
//! members. The self-supervised loss sums agreements with designated partners;
//! the supervised loss averages agreements uniformly over same-family members;
//! the weighted loss replaces the uniform average with a convex combination
//! favoring spectrally close graphs.

use crate::error::Result;
use crate::tensor::{Tape, Tensor, ValueId};

/// Similarity temperature (cosine similarity is divided by this).
pub const SIM_TEMPERATURE: f64 = 0.1;
/// Temperature of the softmax turning spectral distances into positive weights.
pub const ALPHA_TEMPERATURE: f64 = 0.05;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn similarities(z: &[Vec<f64>], i: usize) -> Vec<f64> {
    z.iter().map(|row| dot(&z[i], row) / SIM_TEMPERATURE).collect()
}

fn lse_excluding(scores: &[f64], exclude: usize) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (r, &s) in scores.iter().enumerate() {
        if r != exclude && s > max {
            max = s;
        }
    }
    let sum: f64 = scores
        .iter()
        .enumerate()
        .filter(|&(r, _)| r != exclude)
        .map(|(_, &s)| (s - max).exp())
        .sum();
    max + sum.ln()
}

/// Log-softmax agreement between anchor `i` and index `j`; the denominator runs
/// over every non-anchor member. Always <= 0 for j != i.
pub fn agreement(z: &[Vec<f64>], i: usize, j: usize) -> f64 {
    debug_assert!(z.len() >= 2);
    let scores = similarities(z, i);
    scores[j] - lse_excluding(&scores, i)
}

/// Self-supervised loss: negative agreement with each anchor's partner.
pub fn simclr_loss(z: &[Vec<f64>], partner: &[usize]) -> f64 {
    assert_eq!(z.len(), partner.len());
    -(0..z.len()).map(|i| agreement(z, i, partner[i])).sum::<f64>()
}

/// Non-anchor same-family indices.
fn positives(families: &[usize], i: usize) -> Vec<usize> {
    (0..families.len())
        .filter(|&s| s != i && families[s] == families[i])
        .collect()
}

/// Supervised loss with uniform positive weighting. Anchors without positives
/// contribute nothing; the count of such skipped anchors is returned.
pub fn supcon_loss(z: &[Vec<f64>], families: &[usize]) -> (f64, usize) {
    assert_eq!(z.len(), families.len());
    let mut total = 0.0;
    let mut skipped = 0;
    for i in 0..z.len() {
        let pos = positives(families, i);
        if pos.is_empty() {
            skipped += 1;
            continue;
        }
        let scores = similarities(z, i);
        let lse = lse_excluding(&scores, i);
        let sum: f64 = pos.iter().map(|&s| scores[s] - lse).sum();
        total += -sum / pos.len() as f64;
    }
    (total, skipped)
}

/// Convex weights over an anchor's positives from their spectral distances:
/// softmax of -distance / temperature, so closer graphs weigh strictly more.
pub fn alpha_weights(distances: &[f64]) -> Vec<f64> {
    assert!(!distances.is_empty());
    let scaled: Vec<f64> = distances.iter().map(|d| -d / ALPHA_TEMPERATURE).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Spectrally-weighted contrastive loss. `sigma(i, s)` supplies pairwise spectral
/// distances; positives are non-anchor same-family members. Returns the loss and
/// the number of anchors skipped for lack of positives.
pub fn cl_loss(
    z: &[Vec<f64>],
    families: &[usize],
    sigma: impl Fn(usize, usize) -> f64,
) -> (f64, usize) {
    assert_eq!(z.len(), families.len());
    let mut total = 0.0;
    let mut skipped = 0;
    for i in 0..z.len() {
        let pos = positives(families, i);
        if pos.is_empty() {
            skipped += 1;
            continue;
        }
        let distances: Vec<f64> = pos.iter().map(|&s| sigma(i, s)).collect();
        let alphas = alpha_weights(&distances);
        let scores = similarities(z, i);
        let lse = lse_excluding(&scores, i);
        for (&s, &a) in pos.iter().zip(&alphas) {
            total += -a * (scores[s] - lse);
        }
    }
    (total, skipped)
}

/// Tape version of [`cl_loss`] for training: `z` is the stacked N x p matrix of
/// unit projections. The alpha weights are constants of the batch (they depend
/// on spectral distances, not on parameters), so gradients flow only through the
/// agreements.
pub fn cl_loss_on_tape(
    tape: &mut Tape,
    z: ValueId,
    families: &[usize],
    sigma: impl Fn(usize, usize) -> f64,
) -> Result<(ValueId, usize)> {
    let n = tape.value(z).rows();
    assert_eq!(n, families.len());
    let mut alpha = Tensor::zeros(n, n);
    let mut skipped = 0;
    for i in 0..n {
        let pos = positives(families, i);
        if pos.is_empty() {
            skipped += 1;
            continue;
        }
        let distances: Vec<f64> = pos.iter().map(|&s| sigma(i, s)).collect();
        for (&s, &a) in pos.iter().zip(alpha_weights(&distances).iter()) {
            alpha.set(i, s, a);
        }
    }
    let mask: Vec<bool> = (0..n * n).map(|idx| idx / n != idx % n).collect();
    let sims = tape.matmul_nt(z, z)?;
    let scaled = tape.scale(sims, 1.0 / SIM_TEMPERATURE);
    let lse = tape.logsumexp_rows_masked(scaled, &mask)?;
    let chi = tape.sub_col(scaled, lse)?;
    let alpha_const = tape.constant(alpha);
    let weighted = tape.mul(chi, alpha_const)?;
    let total = tape.sum_all(weighted);
    Ok((tape.scale(total, -1.0), skipped))
}

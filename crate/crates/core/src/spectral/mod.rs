//! Spectral graph machinery: normalized Laplacian, symmetric eigensolver, spectral
//! signatures and the pseudo-distance between them.
//!
//! All of it operates on the undirected simple skeleton of a computation graph
//! (edge directions dropped, parallel edges merged), keeping the spectral view
//! consistent with the encoder's message passing.

mod cache;
mod eig;
mod laplacian;

pub use cache::DistanceCache;
pub use eig::eig_sym;
pub use laplacian::{normalized_laplacian, normalized_laplacian_from_adjacency, SquareMatrix};

use crate::cg::ComputationGraph;
use crate::error::Result;

/// Number of smallest eigenvalues kept in a signature.
pub const SIGNATURE_LEN: usize = 11;

/// The smallest normalized-Laplacian eigenvalues of a graph, ascending,
/// zero-padded when the graph has fewer than [`SIGNATURE_LEN`] nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSignature {
    pub values: [f64; SIGNATURE_LEN],
    pub node_count: usize,
}

impl SpectralSignature {
    /// True when trailing entries are padding rather than eigenvalues.
    pub fn is_padded(&self) -> bool {
        self.node_count < SIGNATURE_LEN
    }
}

/// Compute the spectral signature of a valid computation graph.
pub fn signature(g: &ComputationGraph) -> Result<SpectralSignature> {
    let lap = normalized_laplacian(g)?;
    let eigenvalues = eig_sym(&lap)?;
    Ok(signature_from_eigenvalues(&eigenvalues))
}

pub(crate) fn signature_from_eigenvalues(eigenvalues: &[f64]) -> SpectralSignature {
    let mut values = [0.0; SIGNATURE_LEN];
    for (slot, &ev) in values.iter_mut().zip(eigenvalues.iter()) {
        // eigensolver noise can leave tiny negatives on the zero eigenvalue
        *slot = ev.max(0.0);
    }
    SpectralSignature {
        values,
        node_count: eigenvalues.len(),
    }
}

/// Euclidean distance between two signatures. Symmetric, zero for identical
/// signatures, and a true metric on signature vectors.
pub fn spectral_distance(a: &SpectralSignature, b: &SpectralSignature) -> f64 {
    a.values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

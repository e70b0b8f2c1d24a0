//! Node featurization and the graph encoder with its heads.
//!
//! Node features are a 41-dim vector: one-hot operator kind (14), log2-scaled
//! numeric features for tensor and kernel dimensions (10), a bias flag, and a
//! 16-dim sinusoidal encoding of topological depth. Message passing runs over the
//! undirected simple skeleton, the same view the spectral machinery uses.

mod model;

pub use model::{Encoder, EncoderConfig};

use crate::cg::{validate, ComputationGraph, OP_KIND_COUNT};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NUMERIC_FEATURES: usize = 10;
pub const POSITIONAL_DIM: usize = 16;
pub const NODE_FEATURE_DIM: usize = OP_KIND_COUNT + NUMERIC_FEATURES + 1 + POSITIONAL_DIM;

/// Per-node feature matrix of a graph (n x 41).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub matrix: Tensor,
}

/// A graph preprocessed for the encoder: features plus the undirected simple
/// skeleton as parallel src/dst index lists (both directions of every edge).
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub features: Tensor,
    pub edge_src: Vec<usize>,
    pub edge_dst: Vec<usize>,
    pub node_count: usize,
}

fn log_scale(v: u32) -> f64 {
    (1.0 + v as f64).log2()
}

/// Longest-path depth from the Input node, per node.
fn topological_depth(g: &ComputationGraph) -> Vec<usize> {
    let order = g.topo_order().expect("validated graph is acyclic");
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    for &(s, d) in &g.edges {
        incoming[d].push(s);
    }
    let mut depth = vec![0usize; g.nodes.len()];
    for v in order {
        depth[v] = incoming[v]
            .iter()
            .map(|&s| depth[s] + 1)
            .max()
            .unwrap_or(0);
    }
    depth
}

/// Deterministic node featurization of a valid graph.
pub fn featurize(g: &ComputationGraph) -> Result<NodeFeatures> {
    let report = validate(g);
    if !report.ok() {
        return Err(Error::InvalidGraph(report));
    }
    let depth = topological_depth(g);
    let mut rows = Vec::with_capacity(g.nodes.len());
    for node in &g.nodes {
        let mut row = vec![0.0; NODE_FEATURE_DIM];
        row[node.kind.index()] = 1.0;
        let numeric = [
            node.in_shape.h,
            node.in_shape.w,
            node.in_shape.c,
            node.out_shape.h,
            node.out_shape.w,
            node.out_shape.c,
            node.attributes.kernel_h.unwrap_or(0),
            node.attributes.kernel_w.unwrap_or(0),
            node.attributes.groups.unwrap_or(0),
            node.attributes.dilation.unwrap_or(0),
        ];
        for (slot, v) in numeric.into_iter().enumerate() {
            row[OP_KIND_COUNT + slot] = log_scale(v);
        }
        row[OP_KIND_COUNT + NUMERIC_FEATURES] =
            if node.attributes.has_bias == Some(true) { 1.0 } else { 0.0 };
        let base = OP_KIND_COUNT + NUMERIC_FEATURES + 1;
        let pos = depth[node.id] as f64;
        for pair in 0..POSITIONAL_DIM / 2 {
            let angle = pos / 10_000f64.powf(pair as f64 / (POSITIONAL_DIM / 2) as f64);
            row[base + 2 * pair] = angle.sin();
            row[base + 2 * pair + 1] = angle.cos();
        }
        rows.push(row);
    }
    Ok(NodeFeatures {
        matrix: Tensor::from_rows(rows),
    })
}

/// Featurize and extract the undirected skeleton, ready for encoding.
pub fn prepare(g: &ComputationGraph) -> Result<PreparedGraph> {
    let features = featurize(g)?.matrix;
    let neighbors = g.undirected_neighbors();
    let mut edge_src = Vec::new();
    let mut edge_dst = Vec::new();
    for (dst, adj) in neighbors.iter().enumerate() {
        for &src in adj {
            edge_src.push(src);
            edge_dst.push(dst);
        }
    }
    Ok(PreparedGraph {
        features,
        edge_src,
        edge_dst,
        node_count: g.nodes.len(),
    })
}

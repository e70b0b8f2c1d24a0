//! Weisfeiler-Lehman graph hashing.
//!
//! Colors start from the full node feature tuple (kind, attributes, shapes) and are
//! refined over the undirected skeleton. The final digest hashes the sorted color
//! multiset, so it is invariant under node relabeling; unequal digests certify
//! non-isomorphism, equal digests do not certify isomorphism (WL is one-sided).

use super::{validate, CGNode, ComputationGraph};
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice. Hand-rolled so digests are stable across platforms
/// and toolchain versions.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn fnv_extend(mut h: u64, word: u64) -> u64 {
    for b in word.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn fnv_words(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = FNV_OFFSET;
    for w in words {
        h = fnv_extend(h, w);
    }
    h
}

fn initial_color(node: &CGNode) -> u64 {
    let a = &node.attributes;
    let enc = |x: Option<u32>| x.map(|v| v as u64 + 1).unwrap_or(0);
    fnv_words([
        node.kind.index() as u64,
        enc(a.kernel_h),
        enc(a.kernel_w),
        enc(a.stride),
        enc(a.groups),
        enc(a.dilation),
        a.has_bias.map(|b| b as u64 + 1).unwrap_or(0),
        node.in_shape.h as u64,
        node.in_shape.w as u64,
        node.in_shape.c as u64,
        node.out_shape.h as u64,
        node.out_shape.w as u64,
        node.out_shape.c as u64,
        node.weight_shape
            .map(|w| fnv_words([w.kh as u64, w.kw as u64, w.cin as u64, w.cout as u64]))
            .unwrap_or(0),
    ])
}

/// WL color-refinement digest of a valid graph.
///
/// At zero iterations the digest depends only on the node feature multiset; each
/// iteration folds in one more ring of undirected neighborhood structure (parallel
/// edges kept, so a twice-connected neighbor counts twice).
pub fn wl_hash(g: &ComputationGraph, iterations: usize) -> Result<u64> {
    let report = validate(g);
    if !report.ok() {
        return Err(Error::InvalidGraph(report));
    }
    let n = g.nodes.len();
    let mut colors: Vec<u64> = g.nodes.iter().map(initial_color).collect();

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, d) in &g.edges {
        neighbors[s].push(d);
        neighbors[d].push(s);
    }

    let mut scratch = Vec::new();
    for _ in 0..iterations {
        let mut next = Vec::with_capacity(n);
        for v in 0..n {
            scratch.clear();
            scratch.extend(neighbors[v].iter().map(|&u| colors[u]));
            scratch.sort_unstable();
            let mut h = fnv_extend(FNV_OFFSET, colors[v]);
            for &c in scratch.iter() {
                h = fnv_extend(h, c);
            }
            next.push(h);
        }
        colors = next;
    }

    colors.sort_unstable();
    let mut h = fnv_extend(FNV_OFFSET, n as u64);
    for c in colors {
        h = fnv_extend(h, c);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cg::{GraphBuilder, OpAttrs, OpKind, PrimitiveOp, Shape, WeightShape};

    fn chain(kinds: &[OpKind]) -> ComputationGraph {
        let s = Shape::new(8, 8, 16);
        let mut b = GraphBuilder::new();
        let mut prev = b.add(PrimitiveOp::plain(OpKind::Input), s, s, None);
        for &k in kinds {
            let (attrs, w) = match k {
                OpKind::Conv2D => (
                    OpAttrs::conv(1, 1, 1, 1),
                    Some(WeightShape::from((1, 1, 16, 16))),
                ),
                OpKind::BatchNorm => (OpAttrs::biased(), Some(WeightShape::from((1, 1, 1, 16)))),
                _ => (OpAttrs::none(), None),
            };
            let id = b.add(PrimitiveOp { kind: k, attributes: attrs }, s, s, w);
            b.connect(prev, id);
            prev = id;
        }
        let out = b.add(PrimitiveOp::plain(OpKind::Output), s, s, None);
        b.connect(prev, out);
        b.finish(None).unwrap()
    }

    #[test]
    fn relabeled_copy_hashes_equal() {
        let g = chain(&[OpKind::Conv2D, OpKind::BatchNorm, OpKind::ReLU]);
        // reverse node ids by hand
        let n = g.nodes.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut nodes: Vec<_> = g
            .nodes
            .iter()
            .cloned()
            .map(|mut nd| {
                nd.id = perm[nd.id];
                nd
            })
            .collect();
        nodes.sort_by_key(|nd| nd.id);
        let edges = g.edges.iter().map(|&(s, d)| (perm[s], perm[d])).collect();
        let h = ComputationGraph { nodes, edges, family: g.family.clone() };
        assert_eq!(wl_hash(&g, 3).unwrap(), wl_hash(&h, 3).unwrap());
    }

    #[test]
    fn operator_order_distinguished_after_one_iteration() {
        let a = chain(&[OpKind::Conv2D, OpKind::BatchNorm, OpKind::ReLU]);
        let b = chain(&[OpKind::ReLU, OpKind::Conv2D, OpKind::BatchNorm]);
        assert_ne!(wl_hash(&a, 1).unwrap(), wl_hash(&b, 1).unwrap());
        assert_ne!(wl_hash(&a, 3).unwrap(), wl_hash(&b, 3).unwrap());
    }

    #[test]
    fn zero_iterations_sees_only_the_node_multiset() {
        let a = chain(&[OpKind::Conv2D, OpKind::BatchNorm, OpKind::ReLU]);
        let b = chain(&[OpKind::ReLU, OpKind::Conv2D, OpKind::BatchNorm]);
        assert_eq!(wl_hash(&a, 0).unwrap(), wl_hash(&b, 0).unwrap());
    }

    #[test]
    fn invalid_graph_rejected() {
        let mut g = chain(&[OpKind::ReLU]);
        g.edges.push((2, 1)); // introduce a cycle
        assert!(matches!(wl_hash(&g, 3), Err(Error::InvalidGraph(_))));
    }
}

//! Computation-graph data model: primitive operators, shape-annotated nodes, the
//! DAG container, plus validation, WL hashing and JSON serialization.
//!
//! A graph is immutable once built. [`GraphBuilder`] assigns dense node ids in
//! topological order and validates the result, so every graph produced through it
//! satisfies the structural invariants checked by [`validate`].

mod hash;
mod io;
mod validate;

pub(crate) use hash::fnv1a;
pub use hash::wl_hash;
pub use validate::{validate, ValidationReport, Violation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fixed primitive-operator vocabulary.
///
/// `Zero` only ever appears in symbolic cell specifications; lowering removes it,
/// and validation rejects it inside a finished graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    Input,
    Output,
    Conv2D,
    BatchNorm,
    ReLU,
    Sigmoid,
    MaxPool,
    AvgPool,
    GlobalAvgPool,
    Linear,
    Add,
    Concat,
    Multiply,
    Zero,
}

pub const OP_KIND_COUNT: usize = 14;

pub const ALL_OP_KINDS: [OpKind; OP_KIND_COUNT] = [
    OpKind::Input,
    OpKind::Output,
    OpKind::Conv2D,
    OpKind::BatchNorm,
    OpKind::ReLU,
    OpKind::Sigmoid,
    OpKind::MaxPool,
    OpKind::AvgPool,
    OpKind::GlobalAvgPool,
    OpKind::Linear,
    OpKind::Add,
    OpKind::Concat,
    OpKind::Multiply,
    OpKind::Zero,
];

impl OpKind {
    /// Kinds that carry trainable weights and therefore a weight shape.
    pub fn is_weighted(self) -> bool {
        matches!(self, OpKind::Conv2D | OpKind::BatchNorm | OpKind::Linear)
    }

    /// Kinds for which kernel/stride attributes are meaningful.
    pub fn takes_kernel(self) -> bool {
        matches!(self, OpKind::Conv2D | OpKind::MaxPool | OpKind::AvgPool)
    }

    /// Index into [`ALL_OP_KINDS`], used for one-hot features and histograms.
    pub fn index(self) -> usize {
        ALL_OP_KINDS.iter().position(|k| *k == self).unwrap()
    }
}

/// Numeric operator attributes. Only the fields meaningful for the kind are set;
/// the JSON form omits absent fields entirely.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpAttrs {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel_h: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel_w: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stride: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub groups: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dilation: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub has_bias: Option<bool>,
}

impl OpAttrs {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn conv(kernel: u32, stride: u32, groups: u32, dilation: u32) -> Self {
        OpAttrs {
            kernel_h: Some(kernel),
            kernel_w: Some(kernel),
            stride: Some(stride),
            groups: Some(groups),
            dilation: Some(dilation),
            has_bias: Some(false),
        }
    }

    pub fn pool(kernel: u32, stride: u32) -> Self {
        OpAttrs {
            kernel_h: Some(kernel),
            kernel_w: Some(kernel),
            stride: Some(stride),
            ..Self::default()
        }
    }

    pub fn biased() -> Self {
        OpAttrs {
            has_bias: Some(true),
            ..Self::default()
        }
    }
}

/// A primitive operator: its kind plus numeric attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveOp {
    pub kind: OpKind,
    #[serde(default)]
    pub attributes: OpAttrs,
}

impl PrimitiveOp {
    pub fn plain(kind: OpKind) -> Self {
        PrimitiveOp {
            kind,
            attributes: OpAttrs::none(),
        }
    }
}

/// Activation-tensor shape (height, width, channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(u32, u32, u32)", into = "(u32, u32, u32)")]
pub struct Shape {
    pub h: u32,
    pub w: u32,
    pub c: u32,
}

impl Shape {
    pub fn new(h: u32, w: u32, c: u32) -> Self {
        Shape { h, w, c }
    }

    pub fn with_channels(self, c: u32) -> Self {
        Shape { c, ..self }
    }
}

impl From<(u32, u32, u32)> for Shape {
    fn from(t: (u32, u32, u32)) -> Self {
        Shape::new(t.0, t.1, t.2)
    }
}

impl From<Shape> for (u32, u32, u32) {
    fn from(s: Shape) -> Self {
        (s.h, s.w, s.c)
    }
}

/// Weight-tensor shape (kernel_h, kernel_w, in_channels_per_group, out_channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(u32, u32, u32, u32)", into = "(u32, u32, u32, u32)")]
pub struct WeightShape {
    pub kh: u32,
    pub kw: u32,
    pub cin: u32,
    pub cout: u32,
}

impl From<(u32, u32, u32, u32)> for WeightShape {
    fn from(t: (u32, u32, u32, u32)) -> Self {
        WeightShape {
            kh: t.0,
            kw: t.1,
            cin: t.2,
            cout: t.3,
        }
    }
}

impl From<WeightShape> for (u32, u32, u32, u32) {
    fn from(s: WeightShape) -> Self {
        (s.kh, s.kw, s.cin, s.cout)
    }
}

/// One node of a computation graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CGNode {
    pub id: usize,
    pub kind: OpKind,
    #[serde(default)]
    pub attributes: OpAttrs,
    pub in_shape: Shape,
    pub out_shape: Shape,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weight_shape: Option<WeightShape>,
}

impl CGNode {
    pub fn op(&self) -> PrimitiveOp {
        PrimitiveOp {
            kind: self.kind,
            attributes: self.attributes,
        }
    }
}

/// A directed acyclic graph of primitive operators.
///
/// Edges are `(src, dst)` pairs into `nodes` by id and may repeat: a join node fed
/// twice by the same producer keeps both edge instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputationGraph {
    pub nodes: Vec<CGNode>,
    pub edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<String>,
}

impl ComputationGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted, deduplicated neighbor lists of the undirected simple skeleton.
    pub fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut sets: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
        for &(s, d) in &self.edges {
            if s != d {
                sets[s].insert(d);
                sets[d].insert(s);
            }
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Undirected simple-skeleton edge count.
    pub fn undirected_edge_count(&self) -> usize {
        let mut set = std::collections::BTreeSet::new();
        for &(s, d) in &self.edges {
            let (a, b) = if s < d { (s, d) } else { (d, s) };
            set.insert((a, b));
        }
        set.len()
    }

    /// One topological order of node ids; `None` if the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        topo_order_of(self.nodes.len(), &self.edges)
    }

    pub fn weighted_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind.is_weighted()).count()
    }
}

/// Kahn's algorithm with smallest-id-first tie breaking, so the order is canonical.
pub(crate) fn topo_order_of(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, d) in edges {
        indeg[d] += 1;
        out[s].push(d);
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &d in &out[v] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.insert(d);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Incremental graph construction. Node ids handed out by [`GraphBuilder::add`] are
/// provisional; [`GraphBuilder::finish`] renumbers them densely in topological order
/// and validates the result.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<CGNode>,
    edges: Vec<(usize, usize)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        op: PrimitiveOp,
        in_shape: Shape,
        out_shape: Shape,
        weight_shape: Option<WeightShape>,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(CGNode {
            id,
            kind: op.kind,
            attributes: op.attributes,
            in_shape,
            out_shape,
            weight_shape,
        });
        id
    }

    pub fn connect(&mut self, src: usize, dst: usize) {
        debug_assert!(src < self.nodes.len() && dst < self.nodes.len());
        self.edges.push((src, dst));
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn out_shape(&self, id: usize) -> Shape {
        self.nodes[id].out_shape
    }

    /// Renumber in topological order, attach the family tag and validate.
    pub fn finish(self, family: Option<String>) -> Result<ComputationGraph> {
        let order = topo_order_of(self.nodes.len(), &self.edges)
            .ok_or_else(|| Error::Parse("graph under construction contains a cycle".into()))?;
        let mut remap = vec![0usize; self.nodes.len()];
        for (new_id, &old_id) in order.iter().enumerate() {
            remap[old_id] = new_id;
        }
        let mut nodes: Vec<CGNode> = self
            .nodes
            .into_iter()
            .map(|mut n| {
                n.id = remap[n.id];
                n
            })
            .collect();
        nodes.sort_by_key(|n| n.id);
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .into_iter()
            .map(|(s, d)| (remap[s], remap[d]))
            .collect();
        edges.sort_unstable();
        let graph = ComputationGraph {
            nodes,
            edges,
            family,
        };
        let report = validate(&graph);
        if !report.ok() {
            return Err(Error::InvalidGraph(report));
        }
        Ok(graph)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Input -> ReLU -> Output chain with a constant shape.
    pub fn relu_chain(shape: Shape) -> ComputationGraph {
        let mut b = GraphBuilder::new();
        let i = b.add(PrimitiveOp::plain(OpKind::Input), shape, shape, None);
        let r = b.add(PrimitiveOp::plain(OpKind::ReLU), shape, shape, None);
        let o = b.add(PrimitiveOp::plain(OpKind::Output), shape, shape, None);
        b.connect(i, r);
        b.connect(r, o);
        b.finish(None).unwrap()
    }
}

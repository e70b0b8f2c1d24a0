//! Cell lowering and macro-skeleton assembly.

use super::cell::{CellSpec, Nb101Cell, Nb201Cell, Nb301Cell, NB201_EDGES};
use super::expand::{expand_nb101, expand_nb201, expand_nb301, ChainBuilder, ChainNode};
use crate::cg::{ComputationGraph, GraphBuilder, OpKind, PrimitiveOp, Shape};
use crate::error::{Error, Result};

/// Macro-skeleton configuration: stem, cell stages with channel-doubling
/// reductions in between, and the classifier head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroConfig {
    pub input_shape: Shape,
    pub stem_channels: u32,
    pub stages: u32,
    pub cells_per_stage: u32,
    pub num_classes: u32,
    pub classifier: bool,
}

impl Default for MacroConfig {
    fn default() -> Self {
        // Desk-scale skeleton: keeps lowered graphs in the 30..250 node range.
        MacroConfig {
            input_shape: Shape::new(32, 32, 3),
            stem_channels: 16,
            stages: 3,
            cells_per_stage: 1,
            num_classes: 10,
            classifier: true,
        }
    }
}

impl MacroConfig {
    pub fn check(&self) -> Result<()> {
        if self.stem_channels < 1
            || self.stages < 1
            || self.cells_per_stage < 1
            || self.num_classes < 1
        {
            return Err(Error::Config("macro counts must all be >= 1".into()));
        }
        let factor = 1u32 << (self.stages - 1);
        if self.input_shape.h % factor != 0 || self.input_shape.w % factor != 0 {
            return Err(Error::Config(format!(
                "input {}x{} not divisible by the reduction factor {factor}",
                self.input_shape.h, self.input_shape.w
            )));
        }
        Ok(())
    }
}

/// A lowered cell, with node ids local to the fragment.
///
/// `entry_consumers` lists the local nodes fed by the cell input (with multiplicity,
/// one entry per edge). `exit` is the local node producing the cell output; `None`
/// means the cell is a pure pass-through and its output *is* its input.
#[derive(Debug, Clone)]
pub struct CellFragment {
    pub nodes: Vec<ChainNode>,
    pub edges: Vec<(usize, usize)>,
    pub entry_consumers: Vec<usize>,
    pub exit: Option<usize>,
}

impl CellFragment {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes that came from grouped-operator expansion (everything except the
    /// Add/Concat joins and the concat projection).
    pub fn grouped_op_node_count(&self) -> usize {
        let mut count = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            match node.op.kind {
                OpKind::Add | OpKind::Concat => count -= 1,
                // the 1x1 projection directly after a Concat is plumbing too
                OpKind::Conv2D => {
                    if self
                        .edges
                        .iter()
                        .any(|&(s, d)| d == i && self.nodes[s].op.kind == OpKind::Concat)
                    {
                        count -= 1;
                    }
                }
                _ => {}
            }
        }
        count
    }
}

/// Where a value inside a fragment under construction comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Producer {
    Entry,
    Node(usize),
}

#[derive(Default)]
struct FragBuilder {
    nodes: Vec<ChainNode>,
    edges: Vec<(usize, usize)>,
    entry_consumers: Vec<usize>,
}

impl FragBuilder {
    fn connect(&mut self, from: Producer, to: usize) {
        match from {
            Producer::Entry => self.entry_consumers.push(to),
            Producer::Node(i) => self.edges.push((i, to)),
        }
    }

    fn push(&mut self, node: ChainNode, from: Producer) -> Producer {
        let id = self.nodes.len();
        self.nodes.push(node);
        self.connect(from, id);
        Producer::Node(id)
    }

    /// Wire a linear chain starting at `from`; empty chains pass `from` through.
    fn emit_chain(&mut self, chain: Vec<ChainNode>, from: Producer) -> Producer {
        let mut cur = from;
        for node in chain {
            cur = self.push(node, cur);
        }
        cur
    }

    /// Join branch producers: single branches pass through, multiple meet in `Add`.
    fn join(&mut self, branches: &[Producer], shape: Shape) -> Option<Producer> {
        match branches.len() {
            0 => None,
            1 => Some(branches[0]),
            _ => {
                let id = self.nodes.len();
                self.nodes.push(ChainNode {
                    op: PrimitiveOp::plain(OpKind::Add),
                    in_shape: shape,
                    out_shape: shape,
                    weight_shape: None,
                });
                for &b in branches {
                    self.connect(b, id);
                }
                Some(Producer::Node(id))
            }
        }
    }

    /// Concatenate branch producers and project back to `channels` with a 1x1 conv.
    /// Single branches pass through without plumbing.
    fn concat_project(&mut self, branches: &[Producer], shape: Shape) -> Option<Producer> {
        match branches.len() {
            0 => None,
            1 => Some(branches[0]),
            _ => {
                let cat_shape = shape.with_channels(shape.c * branches.len() as u32);
                let cat = self.nodes.len();
                self.nodes.push(ChainNode {
                    op: PrimitiveOp::plain(OpKind::Concat),
                    in_shape: cat_shape,
                    out_shape: cat_shape,
                    weight_shape: None,
                });
                for &b in branches {
                    self.connect(b, cat);
                }
                let mut proj = ChainBuilder::new(cat_shape);
                proj.conv(1, shape.c, 1, 1);
                Some(self.emit_chain(proj.finish(), Producer::Node(cat)))
            }
        }
    }

    fn finish(self, exit: Producer) -> CellFragment {
        CellFragment {
            nodes: self.nodes,
            edges: self.edges,
            entry_consumers: self.entry_consumers,
            exit: match exit {
                Producer::Entry => None,
                Producer::Node(i) => Some(i),
            },
        }
    }
}

fn lower_nb201(cell: &Nb201Cell, shape: Shape, channels: u32) -> Result<CellFragment> {
    use super::dialect::Nb201Op;
    let op_at = |src: usize, dst: usize| cell.edge_ops[edge_index(src, dst)];
    // Branches that cannot reach the cell output are dead computation; emitting
    // them would leave nodes off every Input-to-Output path.
    let mut fwd = [false; 4];
    fwd[0] = true;
    for dst in 1..4 {
        fwd[dst] = (0..dst).any(|src| fwd[src] && op_at(src, dst) != Nb201Op::Zeroize);
    }
    let mut bwd = [false; 4];
    bwd[3] = true;
    for src in (0..3).rev() {
        bwd[src] = (src + 1..4).any(|dst| bwd[dst] && op_at(src, dst) != Nb201Op::Zeroize);
    }
    let live = |v: usize| fwd[v] && bwd[v];
    if !live(0) || !live(3) {
        return Err(Error::DegenerateCell);
    }

    let mut fb = FragBuilder::default();
    let mut producers: [Option<Producer>; 4] = [Some(Producer::Entry), None, None, None];
    for dst in 1..4 {
        if !live(dst) {
            continue;
        }
        let mut branches = Vec::new();
        for src in (0..dst).filter(|&src| live(src)) {
            let op = op_at(src, dst);
            if op == Nb201Op::Zeroize {
                continue;
            }
            let from = producers[src].expect("live cell vertex has a producer");
            let branch = match op {
                Nb201Op::Skip => from,
                _ => fb.emit_chain(expand_nb201(op, shape, channels)?, from),
            };
            branches.push(branch);
        }
        producers[dst] = fb.join(&branches, shape);
    }
    let exit = producers[3].ok_or(Error::DegenerateCell)?;
    Ok(fb.finish(exit))
}

fn edge_index(src: usize, dst: usize) -> usize {
    NB201_EDGES
        .iter()
        .position(|&e| e == (src, dst))
        .expect("edge of the fixed nb201 DAG")
}

fn lower_nb101(cell: &Nb101Cell, shape: Shape, channels: u32) -> Result<CellFragment> {
    cell.check().map_err(|_| Error::DegenerateCell)?;
    let n = cell.vertex_count();
    let keep = cell.on_path();
    if !keep[0] || !keep[n - 1] {
        return Err(Error::DegenerateCell);
    }
    let mut fb = FragBuilder::default();
    let mut producers: Vec<Option<Producer>> = vec![None; n];
    producers[0] = Some(Producer::Entry);
    for v in 1..n - 1 {
        if !keep[v] {
            continue;
        }
        let branches: Vec<Producer> = (0..v)
            .filter(|&u| cell.adjacency[u][v])
            .filter_map(|u| producers[u])
            .collect();
        let joined = fb
            .join(&branches, shape)
            .expect("kept vertex has a kept predecessor");
        let chain = expand_nb101(cell.ops[v - 1], shape, channels);
        producers[v] = Some(fb.emit_chain(chain, joined));
    }
    let branches: Vec<Producer> = (0..n - 1)
        .filter(|&u| cell.adjacency[u][n - 1])
        .filter_map(|u| producers[u])
        .collect();
    let exit = fb
        .concat_project(&branches, shape)
        .ok_or(Error::DegenerateCell)?;
    Ok(fb.finish(exit))
}

fn lower_nb301(cell: &Nb301Cell, shape: Shape, channels: u32) -> Result<CellFragment> {
    use super::dialect::Nb301Op;
    cell.check().map_err(|_| Error::DegenerateCell)?;
    let mut fb = FragBuilder::default();
    // Input slots 0 and 1 both map to the cell entry; slot k+2 is intermediate node k.
    let mut slots: Vec<Option<Producer>> = vec![Some(Producer::Entry), Some(Producer::Entry)];
    for node in &cell.nodes {
        let mut branches = Vec::new();
        for (input, op) in [(node.inputs.0, node.ops.0), (node.inputs.1, node.ops.1)] {
            if op == Nb301Op::Zeroize {
                continue;
            }
            let Some(from) = slots[input] else { continue };
            let branch = match op {
                Nb301Op::Skip => from,
                _ => fb.emit_chain(expand_nb301(op, shape, channels)?, from),
            };
            branches.push(branch);
        }
        slots.push(fb.join(&branches, shape));
    }
    let survivors: Vec<Producer> = slots[2..].iter().filter_map(|s| *s).collect();
    let exit = fb
        .concat_project(&survivors, shape)
        .ok_or(Error::DegenerateCell)?;
    Ok(fb.finish(exit))
}

/// Lower a symbolic cell into a primitive-operator fragment operating at `channels`.
///
/// Zeroize labels contribute no nodes and no edge, skip labels contribute a direct
/// connection. Multi-fan-in cell vertices join through `Add`; multi-input cell
/// outputs join through `Concat` followed by a 1x1 convolution restoring `channels`.
pub fn lower_cell(spec: &CellSpec, in_shape: Shape, channels: u32) -> Result<CellFragment> {
    if in_shape.c != channels {
        return Err(Error::Config(format!(
            "cell input has {} channels, expected {channels}",
            in_shape.c
        )));
    }
    match spec {
        CellSpec::Nb101(c) => lower_nb101(c, in_shape, channels),
        CellSpec::Nb201(c) => lower_nb201(c, in_shape, channels),
        CellSpec::Nb301(c) => lower_nb301(c, in_shape, channels),
    }
}

fn splice(
    builder: &mut GraphBuilder,
    fragment: &CellFragment,
    prev: usize,
) -> usize {
    let offset = builder.node_count();
    for node in &fragment.nodes {
        builder.add(node.op, node.in_shape, node.out_shape, node.weight_shape);
    }
    for &(s, d) in &fragment.edges {
        builder.connect(s + offset, d + offset);
    }
    for &c in &fragment.entry_consumers {
        builder.connect(prev, c + offset);
    }
    match fragment.exit {
        Some(e) => e + offset,
        None => prev,
    }
}

/// Assemble the full network around repeated instances of one cell:
/// Input -> stem Conv/BN/ReLU -> stages of cells with MaxPool + 1x1-conv
/// channel-doubling reductions in between -> GlobalAvgPool -> Linear -> Output.
pub fn build_network(spec: &CellSpec, macro_config: &MacroConfig) -> Result<ComputationGraph> {
    macro_config.check()?;
    spec.check()?;
    let mut b = GraphBuilder::new();
    let in_shape = macro_config.input_shape;
    let input = b.add(PrimitiveOp::plain(OpKind::Input), in_shape, in_shape, None);

    let mut stem = ChainBuilder::new(in_shape);
    stem.conv(3, macro_config.stem_channels, 1, 1);
    stem.batch_norm();
    stem.relu();
    let mut prev = input;
    for node in stem.finish() {
        let id = b.add(node.op, node.in_shape, node.out_shape, node.weight_shape);
        b.connect(prev, id);
        prev = id;
    }

    let mut shape = in_shape.with_channels(macro_config.stem_channels);
    for stage in 0..macro_config.stages {
        for _ in 0..macro_config.cells_per_stage {
            let fragment = lower_cell(spec, shape, shape.c)?;
            prev = splice(&mut b, &fragment, prev);
        }
        if stage + 1 < macro_config.stages {
            let mut reduce = ChainBuilder::new(shape);
            reduce.pool(OpKind::MaxPool, 2, 2);
            reduce.conv(1, shape.c * 2, 1, 1);
            for node in reduce.finish() {
                let id = b.add(node.op, node.in_shape, node.out_shape, node.weight_shape);
                b.connect(prev, id);
                prev = id;
            }
            shape = Shape::new(shape.h / 2, shape.w / 2, shape.c * 2);
        }
    }

    let mut last_shape = shape;
    if macro_config.classifier {
        let pooled = Shape::new(1, 1, shape.c);
        let gap = b.add(PrimitiveOp::plain(OpKind::GlobalAvgPool), shape, pooled, None);
        b.connect(prev, gap);
        let logits = Shape::new(1, 1, macro_config.num_classes);
        let linear = b.add(
            PrimitiveOp {
                kind: OpKind::Linear,
                attributes: crate::cg::OpAttrs::biased(),
            },
            pooled,
            logits,
            Some(crate::cg::WeightShape::from((1, 1, shape.c, macro_config.num_classes))),
        );
        b.connect(gap, linear);
        prev = linear;
        last_shape = logits;
    }
    let output = b.add(PrimitiveOp::plain(OpKind::Output), last_shape, last_shape, None);
    b.connect(prev, output);

    b.finish(Some(spec.dialect().tag().to_string()))
}

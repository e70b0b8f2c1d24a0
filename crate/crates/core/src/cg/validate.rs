//! Structural validation of computation graphs.

use std::fmt;

use super::{topo_order_of, ComputationGraph, OpKind};

/// One invariant violation, carrying the node or edge it names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NodeIdMismatch { index: usize, id: usize },
    EdgeEndpointOutOfRange { edge: (usize, usize) },
    Cycle { nodes: Vec<usize> },
    NoInputNode,
    MultipleInputNodes { nodes: Vec<usize> },
    NoOutputNode,
    MultipleOutputNodes { nodes: Vec<usize> },
    InputHasIncomingEdges { node: usize },
    OutputHasOutgoingEdges { node: usize },
    NotOnInputOutputPath { node: usize },
    NonPositiveShape { node: usize },
    FanInArity { node: usize, expected: &'static str, got: usize },
    FanInShapeMismatch { node: usize, detail: String },
    MissingWeightShape { node: usize },
    UnexpectedWeightShape { node: usize },
    UnexpectedAttribute { node: usize, attribute: &'static str },
    ZeroKindPresent { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NodeIdMismatch { index, id } => {
                write!(f, "node at position {index} has id {id}; ids must be dense 0..n-1")
            }
            EdgeEndpointOutOfRange { edge } => {
                write!(f, "edge ({}, {}) references a missing node", edge.0, edge.1)
            }
            Cycle { nodes } => write!(f, "cycle through nodes {nodes:?}"),
            NoInputNode => write!(f, "no Input node"),
            MultipleInputNodes { nodes } => write!(f, "multiple Input nodes {nodes:?}"),
            NoOutputNode => write!(f, "no Output node"),
            MultipleOutputNodes { nodes } => write!(f, "multiple Output nodes {nodes:?}"),
            InputHasIncomingEdges { node } => write!(f, "Input node {node} has incoming edges"),
            OutputHasOutgoingEdges { node } => write!(f, "Output node {node} has outgoing edges"),
            NotOnInputOutputPath { node } => {
                write!(f, "node {node} lies on no Input-to-Output path")
            }
            NonPositiveShape { node } => write!(f, "node {node} has a shape component < 1"),
            FanInArity { node, expected, got } => {
                write!(f, "node {node} expects {expected} inputs, got {got}")
            }
            FanInShapeMismatch { node, detail } => {
                write!(f, "fan-in shape mismatch at node {node}: {detail}")
            }
            MissingWeightShape { node } => write!(f, "weighted node {node} lacks a weight shape"),
            UnexpectedWeightShape { node } => {
                write!(f, "unweighted node {node} carries a weight shape")
            }
            UnexpectedAttribute { node, attribute } => {
                write!(f, "node {node} carries attribute `{attribute}` its kind does not take")
            }
            ZeroKindPresent { node } => {
                write!(f, "node {node} has kind Zero, which lowering must remove")
            }
        }
    }
}

/// Outcome of [`validate`]: `ok()` iff no violations were found.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Check every structural invariant. Violations are data, not faults: the function
/// never errors, it reports.
pub fn validate(g: &ComputationGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = g.nodes.len();

    for (index, node) in g.nodes.iter().enumerate() {
        if node.id != index {
            report.violations.push(Violation::NodeIdMismatch { index, id: node.id });
        }
    }
    let mut edges_ok = true;
    for &edge in &g.edges {
        if edge.0 >= n || edge.1 >= n {
            report.violations.push(Violation::EdgeEndpointOutOfRange { edge });
            edges_ok = false;
        }
    }
    if !edges_ok || !report.violations.is_empty() {
        // indices are unreliable beyond this point
        return report;
    }

    let order = topo_order_of(n, &g.edges);
    if order.is_none() {
        let mut indeg = vec![0usize; n];
        for &(_, d) in &g.edges {
            indeg[d] += 1;
        }
        // nodes left with positive in-degree after peeling form the cycle region
        let mut remaining: Vec<usize> = Vec::new();
        if let Some(partial) = partial_topo(n, &g.edges) {
            remaining = (0..n).filter(|v| !partial.contains(v)).collect();
        }
        report.violations.push(Violation::Cycle { nodes: remaining });
    }

    let inputs: Vec<usize> = g
        .nodes
        .iter()
        .filter(|nd| nd.kind == OpKind::Input)
        .map(|nd| nd.id)
        .collect();
    match inputs.len() {
        0 => report.violations.push(Violation::NoInputNode),
        1 => {}
        _ => report.violations.push(Violation::MultipleInputNodes { nodes: inputs.clone() }),
    }
    let outputs: Vec<usize> = g
        .nodes
        .iter()
        .filter(|nd| nd.kind == OpKind::Output)
        .map(|nd| nd.id)
        .collect();
    match outputs.len() {
        0 => report.violations.push(Violation::NoOutputNode),
        1 => {}
        _ => report.violations.push(Violation::MultipleOutputNodes { nodes: outputs.clone() }),
    }

    let mut indeg = vec![0usize; n];
    let mut outdeg = vec![0usize; n];
    for &(s, d) in &g.edges {
        outdeg[s] += 1;
        indeg[d] += 1;
    }
    for &i in &inputs {
        if indeg[i] > 0 {
            report.violations.push(Violation::InputHasIncomingEdges { node: i });
        }
    }
    for &o in &outputs {
        if outdeg[o] > 0 {
            report.violations.push(Violation::OutputHasOutgoingEdges { node: o });
        }
    }

    // every node on some Input -> Output path
    if inputs.len() == 1 && outputs.len() == 1 && order.is_some() {
        let fwd = reachable_from(inputs[0], n, &g.edges, false);
        let bwd = reachable_from(outputs[0], n, &g.edges, true);
        for v in 0..n {
            if !(fwd[v] && bwd[v]) {
                report.violations.push(Violation::NotOnInputOutputPath { node: v });
            }
        }
    }

    for node in &g.nodes {
        let id = node.id;
        for s in [node.in_shape, node.out_shape] {
            if s.h < 1 || s.w < 1 || s.c < 1 {
                report.violations.push(Violation::NonPositiveShape { node: id });
                break;
            }
        }
        if node.kind == OpKind::Zero {
            report.violations.push(Violation::ZeroKindPresent { node: id });
        }
        if node.kind.is_weighted() && node.weight_shape.is_none() {
            report.violations.push(Violation::MissingWeightShape { node: id });
        }
        if !node.kind.is_weighted() && node.weight_shape.is_some() {
            report.violations.push(Violation::UnexpectedWeightShape { node: id });
        }
        if !node.kind.takes_kernel() {
            let a = &node.attributes;
            for (present, name) in [
                (a.kernel_h.is_some(), "kernel_h"),
                (a.kernel_w.is_some(), "kernel_w"),
                (a.stride.is_some(), "stride"),
                (a.groups.is_some(), "groups"),
                (a.dilation.is_some(), "dilation"),
            ] {
                if present {
                    report
                        .violations
                        .push(Violation::UnexpectedAttribute { node: id, attribute: name });
                }
            }
        }
        if node.attributes.has_bias.is_some() && !node.kind.is_weighted() {
            report
                .violations
                .push(Violation::UnexpectedAttribute { node: id, attribute: "has_bias" });
        }
    }

    // fan-in arity and shape compatibility
    let mut producers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, d) in &g.edges {
        producers[d].push(s);
    }
    for node in &g.nodes {
        let id = node.id;
        let ins = &producers[id];
        match node.kind {
            OpKind::Input => {}
            OpKind::Add | OpKind::Multiply => {
                if ins.len() < 2 {
                    report.violations.push(Violation::FanInArity {
                        node: id,
                        expected: "at least 2",
                        got: ins.len(),
                    });
                }
                for &p in ins {
                    let got = g.nodes[p].out_shape;
                    if got != node.in_shape {
                        report.violations.push(Violation::FanInShapeMismatch {
                            node: id,
                            detail: format!(
                                "input from node {p} has shape {:?}, expected {:?}",
                                <(u32, u32, u32)>::from(got),
                                <(u32, u32, u32)>::from(node.in_shape)
                            ),
                        });
                    }
                }
            }
            OpKind::Concat => {
                if ins.len() < 2 {
                    report.violations.push(Violation::FanInArity {
                        node: id,
                        expected: "at least 2",
                        got: ins.len(),
                    });
                }
                let mut channel_sum = 0u64;
                for &p in ins {
                    let got = g.nodes[p].out_shape;
                    channel_sum += got.c as u64;
                    if got.h != node.in_shape.h || got.w != node.in_shape.w {
                        report.violations.push(Violation::FanInShapeMismatch {
                            node: id,
                            detail: format!(
                                "input from node {p} has spatial shape {}x{}, expected {}x{}",
                                got.h, got.w, node.in_shape.h, node.in_shape.w
                            ),
                        });
                    }
                }
                if !ins.is_empty() && channel_sum != node.in_shape.c as u64 {
                    report.violations.push(Violation::FanInShapeMismatch {
                        node: id,
                        detail: format!(
                            "input channels sum to {channel_sum}, expected {}",
                            node.in_shape.c
                        ),
                    });
                }
            }
            _ => {
                if ins.len() != 1 {
                    report.violations.push(Violation::FanInArity {
                        node: id,
                        expected: "exactly 1",
                        got: ins.len(),
                    });
                }
                for &p in ins {
                    let got = g.nodes[p].out_shape;
                    if got != node.in_shape {
                        report.violations.push(Violation::FanInShapeMismatch {
                            node: id,
                            detail: format!(
                                "input from node {p} has shape {:?}, expected {:?}",
                                <(u32, u32, u32)>::from(got),
                                <(u32, u32, u32)>::from(node.in_shape)
                            ),
                        });
                    }
                }
            }
        }
    }

    report
}

fn reachable_from(start: usize, n: usize, edges: &[(usize, usize)], reverse: bool) -> Vec<bool> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, d) in edges {
        if reverse {
            adj[d].push(s);
        } else {
            adj[s].push(d);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen
}

fn partial_topo(n: usize, edges: &[(usize, usize)]) -> Option<std::collections::BTreeSet<usize>> {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, d) in edges {
        indeg[d] += 1;
        out[s].push(d);
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut done = std::collections::BTreeSet::new();
    while let Some(v) = ready.pop() {
        done.insert(v);
        for &d in &out[v] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.push(d);
            }
        }
    }
    Some(done)
}

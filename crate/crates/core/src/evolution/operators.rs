//! Crossover and mutation over symbolic cells.

use crate::error::{Error, Result};
use crate::lowering::{
    CellSpec, Nb101Cell, Nb201Op, Nb301Op, NB201_FULL_VOCAB,
};
use crate::rng::{coin, uniform_usize, ChaCha8Rng};

const MAX_MUTATION_ATTEMPTS: usize = 20;

/// Result of a crossover; `fallback` is set when the parents were
/// operator-identical and a 1-edit mutation of the first parent was used instead.
#[derive(Debug, Clone)]
pub struct CrossoverOutcome {
    pub child: CellSpec,
    pub fallback: bool,
}

fn op_slots(spec: &CellSpec) -> Vec<String> {
    match spec {
        CellSpec::Nb101(c) => c.ops.iter().map(|o| o.label().to_string()).collect(),
        CellSpec::Nb201(c) => c.edge_ops.iter().map(|o| o.label().to_string()).collect(),
        CellSpec::Nb301(c) => c
            .nodes
            .iter()
            .flat_map(|n| [n.ops.0.label().to_string(), n.ops.1.label().to_string()])
            .collect(),
    }
}

fn replace_slot(spec: &CellSpec, slot: usize, label: &str) -> Result<CellSpec> {
    let mut child = spec.clone();
    match &mut child {
        CellSpec::Nb101(c) => c.ops[slot] = label.parse()?,
        CellSpec::Nb201(c) => c.edge_ops[slot] = label.parse()?,
        CellSpec::Nb301(c) => {
            let node = &mut c.nodes[slot / 2];
            if slot % 2 == 0 {
                node.ops.0 = label.parse()?;
            } else {
                node.ops.1 = label.parse()?;
            }
        }
    }
    child.check()?;
    Ok(child)
}

/// Single-point uniformly-random crossover: one operator of the second parent
/// replaces one operator of the first, never replacing an operator with itself.
/// Operator-identical parents fall back to a 1-edit mutation of the first parent.
pub fn crossover(
    parent1: &CellSpec,
    parent2: &CellSpec,
    rng: &mut ChaCha8Rng,
) -> Result<CrossoverOutcome> {
    if parent1.dialect() != parent2.dialect() {
        return Err(Error::Config(format!(
            "crossover needs one dialect, got {} and {}",
            parent1.dialect(),
            parent2.dialect()
        )));
    }
    let ops1 = op_slots(parent1);
    let ops2 = op_slots(parent2);
    let mut valid_pairs = Vec::new();
    for (i, a) in ops1.iter().enumerate() {
        for (j, b) in ops2.iter().enumerate() {
            if a != b {
                valid_pairs.push((i, j));
            }
        }
    }
    if valid_pairs.is_empty() {
        return Ok(CrossoverOutcome {
            child: mutate(parent1, 1, rng)?,
            fallback: true,
        });
    }
    let (slot1, slot2) = valid_pairs[uniform_usize(rng, valid_pairs.len())];
    Ok(CrossoverOutcome {
        child: replace_slot(parent1, slot1, &ops2[slot2])?,
        fallback: false,
    })
}

/// Apply `edits` successive 1-edit mutations with the full dialect vocabulary.
pub fn mutate(spec: &CellSpec, edits: usize, rng: &mut ChaCha8Rng) -> Result<CellSpec> {
    mutate_with_vocab(spec, edits, rng, None)
}

/// Like [`mutate`], optionally restricting nb201 operator swaps to a label subset.
pub fn mutate_with_vocab(
    spec: &CellSpec,
    edits: usize,
    rng: &mut ChaCha8Rng,
    nb201_vocab: Option<&[Nb201Op]>,
) -> Result<CellSpec> {
    assert!(edits >= 1, "mutation needs at least one edit");
    let mut current = spec.clone();
    for _ in 0..edits {
        current = match &current {
            CellSpec::Nb101(c) => CellSpec::Nb101(mutate_nb101(c, rng)?),
            CellSpec::Nb201(c) => {
                let vocab = nb201_vocab.unwrap_or(NB201_FULL_VOCAB);
                let mut cell = *c;
                let slot = uniform_usize(rng, 6);
                let choices: Vec<Nb201Op> = vocab
                    .iter()
                    .copied()
                    .filter(|&o| o != cell.edge_ops[slot])
                    .collect();
                if choices.is_empty() {
                    return Err(Error::MutationExhausted {
                        attempts: MAX_MUTATION_ATTEMPTS,
                    });
                }
                cell.edge_ops[slot] = choices[uniform_usize(rng, choices.len())];
                CellSpec::Nb201(cell)
            }
            CellSpec::Nb301(c) => CellSpec::Nb301(mutate_nb301(c, rng)),
        };
    }
    current.check()?;
    Ok(current)
}

#[derive(Clone, Copy, PartialEq)]
enum Nb101Edit {
    SwapOp,
    AddOp,
    RemoveOp,
    AddEdge,
    RemoveEdge,
}

fn mutate_nb101(cell: &Nb101Cell, rng: &mut ChaCha8Rng) -> Result<Nb101Cell> {
    use crate::lowering::Nb101Op;
    for _ in 0..MAX_MUTATION_ATTEMPTS {
        let n = cell.vertex_count();
        let edges = cell.edges();
        let absent: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !cell.adjacency[i][j])
            .collect();
        let mut kinds = Vec::new();
        if n > 2 {
            kinds.push(Nb101Edit::SwapOp);
            kinds.push(Nb101Edit::RemoveOp);
        }
        if n < 7 && cell.edge_count() + 2 <= 9 {
            kinds.push(Nb101Edit::AddOp);
        }
        if !absent.is_empty() && cell.edge_count() < 9 {
            kinds.push(Nb101Edit::AddEdge);
        }
        if !edges.is_empty() {
            kinds.push(Nb101Edit::RemoveEdge);
        }
        let kind = kinds[uniform_usize(rng, kinds.len())];
        let candidate = match kind {
            Nb101Edit::SwapOp => {
                let mut c = cell.clone();
                let v = uniform_usize(rng, c.ops.len());
                let choices: Vec<Nb101Op> = Nb101Op::ALL
                    .iter()
                    .copied()
                    .filter(|&o| o != c.ops[v])
                    .collect();
                c.ops[v] = choices[uniform_usize(rng, choices.len())];
                c
            }
            Nb101Edit::AddOp => {
                // insert a vertex at a random interior position with random
                // connections backward and forward
                let pos = 1 + uniform_usize(rng, n - 1);
                let mut adjacency = vec![vec![false; n + 1]; n + 1];
                let old = |v: usize| if v < pos { v } else { v + 1 };
                for (i, j) in edges.iter().copied() {
                    adjacency[old(i)][old(j)] = true;
                }
                let mut preds = Vec::new();
                for i in 0..pos {
                    if coin(rng) {
                        preds.push(i);
                    }
                }
                if preds.is_empty() {
                    preds.push(uniform_usize(rng, pos));
                }
                let mut succs = Vec::new();
                for j in pos + 1..n + 1 {
                    if coin(rng) {
                        succs.push(j);
                    }
                }
                if succs.is_empty() {
                    succs.push(pos + 1 + uniform_usize(rng, n - pos));
                }
                for i in preds {
                    adjacency[i][pos] = true;
                }
                for j in succs {
                    adjacency[pos][j] = true;
                }
                let mut ops = cell.ops.clone();
                ops.insert(pos - 1, Nb101Op::ALL[uniform_usize(rng, Nb101Op::ALL.len())]);
                Nb101Cell { adjacency, ops }
            }
            Nb101Edit::RemoveOp => {
                let v = 1 + uniform_usize(rng, n - 2);
                let mut adjacency = vec![vec![false; n - 1]; n - 1];
                let remap = |x: usize| if x < v { x } else { x - 1 };
                for (i, j) in edges.iter().copied() {
                    if i != v && j != v {
                        adjacency[remap(i)][remap(j)] = true;
                    }
                }
                let mut ops = cell.ops.clone();
                ops.remove(v - 1);
                Nb101Cell { adjacency, ops }
            }
            Nb101Edit::AddEdge => {
                let mut c = cell.clone();
                let (i, j) = absent[uniform_usize(rng, absent.len())];
                c.adjacency[i][j] = true;
                c
            }
            Nb101Edit::RemoveEdge => {
                let mut c = cell.clone();
                let (i, j) = edges[uniform_usize(rng, edges.len())];
                c.adjacency[i][j] = false;
                c
            }
        };
        if candidate.check().is_ok() {
            return Ok(candidate);
        }
    }
    Err(Error::MutationExhausted {
        attempts: MAX_MUTATION_ATTEMPTS,
    })
}

fn mutate_nb301(cell: &crate::lowering::Nb301Cell, rng: &mut ChaCha8Rng) -> crate::lowering::Nb301Cell {
    let mut c = cell.clone();
    // operator swap always applies; input rewiring only for nodes with more than
    // one possible input pair
    let rewire_applicable = true; // nodes 1..=3 always have at least 3 input choices
    let do_rewire = rewire_applicable && coin(rng);
    if do_rewire {
        let pos = 1 + uniform_usize(rng, 3);
        let node = &mut c.nodes[pos];
        let limit = pos + 2;
        let keep_first = coin(rng);
        let (kept_input, kept_op, swapped_op) = if keep_first {
            (node.inputs.0, node.ops.0, node.ops.1)
        } else {
            (node.inputs.1, node.ops.1, node.ops.0)
        };
        let choices: Vec<usize> = (0..limit)
            .filter(|&i| i != kept_input && i != node.inputs.0 && i != node.inputs.1)
            .collect();
        if !choices.is_empty() {
            let new_input = choices[uniform_usize(rng, choices.len())];
            let (a, b) = (kept_input.min(new_input), kept_input.max(new_input));
            let (op_a, op_b) = if a == kept_input {
                (kept_op, swapped_op)
            } else {
                (swapped_op, kept_op)
            };
            node.inputs = (a, b);
            node.ops = (op_a, op_b);
            return c;
        }
    }
    let slot = uniform_usize(rng, 8);
    let node = &mut c.nodes[slot / 2];
    let current = if slot % 2 == 0 { node.ops.0 } else { node.ops.1 };
    let choices: Vec<Nb301Op> = Nb301Op::ALL.iter().copied().filter(|&o| o != current).collect();
    let new_op = choices[uniform_usize(rng, choices.len())];
    if slot % 2 == 0 {
        node.ops.0 = new_op;
    } else {
        node.ops.1 = new_op;
    }
    c
}

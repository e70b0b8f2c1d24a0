//! Random cell sampling and small-space enumeration.

use super::cell::{CellSpec, Nb101Cell, Nb201Cell, Nb301Cell, Nb301NodeSpec, NB101_MAX_EDGES};
use super::dialect::{Dialect, Nb101Op, Nb201Op, Nb301Op};
use crate::rng::{coin, uniform_usize, ChaCha8Rng};

/// Sample a random cell of the dialect, uniform over its constraint set.
///
/// `nb101` rejection-samples adjacency bits until the edge budget holds and OUT is
/// reachable; `nb201` draws one label per edge; `nb301` draws an input pair and two
/// labels per node.
pub fn random_cell(dialect: Dialect, rng: &mut ChaCha8Rng) -> CellSpec {
    match dialect {
        Dialect::Nb101 => CellSpec::Nb101(random_nb101_cell(rng)),
        Dialect::Nb201 => CellSpec::Nb201(random_nb201_cell(Nb201Op::ALL, rng)),
        Dialect::Nb301 => CellSpec::Nb301(random_nb301_cell(rng)),
    }
}

pub(crate) fn random_nb101_cell(rng: &mut ChaCha8Rng) -> Nb101Cell {
    loop {
        let n = 3 + uniform_usize(rng, 5); // 3..=7 vertices
        let mut adjacency = vec![vec![false; n]; n];
        let mut edges = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                if coin(rng) {
                    adjacency[i][j] = true;
                    edges += 1;
                }
            }
        }
        if edges == 0 || edges > NB101_MAX_EDGES {
            continue;
        }
        let ops = (0..n - 2)
            .map(|_| Nb101Op::ALL[uniform_usize(rng, Nb101Op::ALL.len())])
            .collect();
        let cell = Nb101Cell { adjacency, ops };
        if cell.check().is_ok() {
            return cell;
        }
    }
}

/// Sample an `nb201` cell with labels drawn uniformly from `vocab`.
pub fn random_nb201_cell(vocab: &[Nb201Op], rng: &mut ChaCha8Rng) -> Nb201Cell {
    let mut edge_ops = [Nb201Op::Skip; 6];
    for slot in edge_ops.iter_mut() {
        *slot = vocab[uniform_usize(rng, vocab.len())];
    }
    Nb201Cell { edge_ops }
}

pub(crate) fn random_nb301_cell(rng: &mut ChaCha8Rng) -> Nb301Cell {
    let mut nodes = Vec::with_capacity(4);
    for pos in 0..4 {
        let limit = pos + 2;
        let a = uniform_usize(rng, limit);
        let b = loop {
            let b = uniform_usize(rng, limit);
            if b != a {
                break b;
            }
        };
        let inputs = (a.min(b), a.max(b));
        let ops = (
            Nb301Op::ALL[uniform_usize(rng, Nb301Op::ALL.len())],
            Nb301Op::ALL[uniform_usize(rng, Nb301Op::ALL.len())],
        );
        nodes.push(Nb301NodeSpec { inputs, ops });
    }
    Nb301Cell {
        nodes: nodes.try_into().expect("four nodes"),
    }
}

/// Every `nb201` cell over the given vocabulary, in lexicographic label order.
pub fn enumerate_nb201_cells(vocab: &[Nb201Op]) -> impl Iterator<Item = Nb201Cell> + '_ {
    let total = vocab.len().pow(6);
    (0..total).map(move |mut code| {
        let mut edge_ops = [Nb201Op::Skip; 6];
        for slot in edge_ops.iter_mut() {
            *slot = vocab[code % vocab.len()];
            code /= vocab.len();
        }
        Nb201Cell { edge_ops }
    })
}

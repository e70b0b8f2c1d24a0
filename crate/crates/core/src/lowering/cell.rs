//! Symbolic cell specifications and their text encodings.
//!
//! Text forms mirror each benchmark's conventional encoding, prefixed with the
//! dialect tag:
//!
//! - `nb101:<n*n adjacency bits, row-major>:<in,op,...,out>`
//! - `nb201:<op>|<op>|<op>|<op>|<op>|<op>` (six edge labels in canonical order)
//! - `nb301:(i,j,op,op);(i,j,op,op);(i,j,op,op);(i,j,op,op)` (one tuple per node)

use std::fmt;
use std::str::FromStr;

use super::dialect::{Dialect, Nb101Op, Nb201Op, Nb301Op};
use crate::error::{Error, Result};

/// Canonical edge order of the `nb201` cell DAG over nodes 0..=3
/// (node 0 is the cell input, node 3 the cell output).
pub const NB201_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)];

/// Vertex-labeled cell: adjacency over up to 7 vertices (vertex 0 is IN, the last
/// vertex is OUT) with at most 9 edges, and one operator per internal vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nb101Cell {
    /// Strictly upper-triangular adjacency matrix, `adjacency[i][j]` for edge i -> j.
    pub adjacency: Vec<Vec<bool>>,
    /// Operators of internal vertices 1..n-1 (length n-2).
    pub ops: Vec<Nb101Op>,
}

pub const NB101_MAX_VERTICES: usize = 7;
pub const NB101_MAX_EDGES: usize = 9;

impl Nb101Cell {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .sum()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.vertex_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.adjacency[i][j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Vertices reachable from IN and co-reachable to OUT.
    pub fn on_path(&self) -> Vec<bool> {
        let n = self.vertex_count();
        let mut fwd = vec![false; n];
        let mut stack = vec![0usize];
        fwd[0] = true;
        while let Some(v) = stack.pop() {
            for j in 0..n {
                if self.adjacency[v][j] && !fwd[j] {
                    fwd[j] = true;
                    stack.push(j);
                }
            }
        }
        let mut bwd = vec![false; n];
        let mut stack = vec![n - 1];
        bwd[n - 1] = true;
        while let Some(v) = stack.pop() {
            for i in 0..n {
                if self.adjacency[i][v] && !bwd[i] {
                    bwd[i] = true;
                    stack.push(i);
                }
            }
        }
        (0..n).map(|v| fwd[v] && bwd[v]).collect()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.vertex_count();
        if !(2..=NB101_MAX_VERTICES).contains(&n) {
            return Err(Error::Parse(format!(
                "nb101 cell has {n} vertices, allowed 2..=7"
            )));
        }
        for (i, row) in self.adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse("nb101 adjacency matrix is not square".into()));
            }
            for (j, &bit) in row.iter().enumerate() {
                if bit && j <= i {
                    return Err(Error::Parse(format!(
                        "nb101 adjacency is not upper-triangular at ({i}, {j})"
                    )));
                }
            }
        }
        if self.edge_count() > NB101_MAX_EDGES {
            return Err(Error::Parse(format!(
                "nb101 cell has {} edges, allowed at most {NB101_MAX_EDGES}",
                self.edge_count()
            )));
        }
        if self.ops.len() != n - 2 {
            return Err(Error::Parse(format!(
                "nb101 cell has {} operator labels for {} internal vertices",
                self.ops.len(),
                n - 2
            )));
        }
        if !self.on_path()[n - 1] {
            return Err(Error::Parse("nb101 cell OUT is unreachable from IN".into()));
        }
        Ok(())
    }
}

/// Edge-labeled cell on the fixed complete DAG over 4 nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nb201Cell {
    pub edge_ops: [Nb201Op; 6],
}

impl Nb201Cell {
    pub fn op_between(&self, src: usize, dst: usize) -> Nb201Op {
        let idx = NB201_EDGES
            .iter()
            .position(|&e| e == (src, dst))
            .expect("edge of the fixed nb201 DAG");
        self.edge_ops[idx]
    }
}

/// One intermediate node of an `nb301` cell: two (input, operator) pairs. Input
/// indices 0 and 1 are the cell's two input slots, index `k + 2` is intermediate
/// node `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Nb301NodeSpec {
    pub inputs: (usize, usize),
    pub ops: (Nb301Op, Nb301Op),
}

/// Two-input-node cell with four intermediate nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nb301Cell {
    pub nodes: [Nb301NodeSpec; 4],
}

pub const NB301_INTERMEDIATE_NODES: usize = 4;

impl Nb301Cell {
    pub fn check(&self) -> Result<()> {
        for (pos, node) in self.nodes.iter().enumerate() {
            let limit = pos + 2;
            let (a, b) = node.inputs;
            if a >= limit || b >= limit {
                return Err(Error::Parse(format!(
                    "nb301 node {pos} references input >= {limit}"
                )));
            }
            if a >= b {
                return Err(Error::Parse(format!(
                    "nb301 node {pos} inputs must be distinct and ascending"
                )));
            }
        }
        Ok(())
    }
}

/// A dialect-tagged symbolic cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellSpec {
    Nb101(Nb101Cell),
    Nb201(Nb201Cell),
    Nb301(Nb301Cell),
}

impl CellSpec {
    pub fn dialect(&self) -> Dialect {
        match self {
            CellSpec::Nb101(_) => Dialect::Nb101,
            CellSpec::Nb201(_) => Dialect::Nb201,
            CellSpec::Nb301(_) => Dialect::Nb301,
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            CellSpec::Nb101(c) => c.check(),
            CellSpec::Nb201(_) => Ok(()),
            CellSpec::Nb301(c) => c.check(),
        }
    }
}

impl fmt::Display for CellSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellSpec::Nb101(c) => {
                let n = c.vertex_count();
                write!(f, "nb101:")?;
                for i in 0..n {
                    for j in 0..n {
                        write!(f, "{}", if c.adjacency[i][j] { '1' } else { '0' })?;
                    }
                }
                write!(f, ":in")?;
                for op in &c.ops {
                    write!(f, ",{op}")?;
                }
                write!(f, ",out")
            }
            CellSpec::Nb201(c) => {
                let labels: Vec<&str> = c.edge_ops.iter().map(|o| o.label()).collect();
                write!(f, "nb201:{}", labels.join("|"))
            }
            CellSpec::Nb301(c) => {
                let tuples: Vec<String> = c
                    .nodes
                    .iter()
                    .map(|nd| {
                        format!(
                            "({},{},{},{})",
                            nd.inputs.0, nd.inputs.1, nd.ops.0, nd.ops.1
                        )
                    })
                    .collect();
                write!(f, "nb301:{}", tuples.join(";"))
            }
        }
    }
}

impl FromStr for CellSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse("cell spec lacks a dialect prefix".into()))?;
        match tag {
            "nb101" => parse_nb101(body),
            "nb201" => parse_nb201(body),
            "nb301" => parse_nb301(body),
            other => Err(Error::Parse(format!("unknown dialect prefix `{other}`"))),
        }
    }
}

fn parse_nb101(body: &str) -> Result<CellSpec> {
    let (bits, ops) = body
        .split_once(':')
        .ok_or_else(|| Error::Parse("nb101 spec needs `<bits>:<ops>`".into()))?;
    let len = bits.len();
    let n = (1..=NB101_MAX_VERTICES)
        .find(|&n| n * n == len)
        .ok_or_else(|| Error::Parse(format!("nb101 adjacency has {len} bits, not a square")))?;
    let mut adjacency = vec![vec![false; n]; n];
    for (idx, ch) in bits.chars().enumerate() {
        adjacency[idx / n][idx % n] = match ch {
            '0' => false,
            '1' => true,
            other => return Err(Error::Parse(format!("nb101 adjacency bit `{other}`"))),
        };
    }
    let labels: Vec<&str> = ops.split(',').collect();
    if labels.len() != n {
        return Err(Error::Parse(format!(
            "nb101 op list has {} entries for {n} vertices",
            labels.len()
        )));
    }
    if labels[0] != "in" || labels[n - 1] != "out" {
        return Err(Error::Parse(
            "nb101 op list must start with `in` and end with `out`".into(),
        ));
    }
    let ops = labels[1..n - 1]
        .iter()
        .map(|l| l.parse())
        .collect::<Result<Vec<Nb101Op>>>()?;
    let cell = Nb101Cell { adjacency, ops };
    cell.check()?;
    Ok(CellSpec::Nb101(cell))
}

fn parse_nb201(body: &str) -> Result<CellSpec> {
    let labels: Vec<&str> = body.split('|').collect();
    if labels.len() != 6 {
        return Err(Error::Parse(format!(
            "nb201 spec has {} labels, expected 6",
            labels.len()
        )));
    }
    let mut edge_ops = [Nb201Op::Skip; 6];
    for (i, l) in labels.iter().enumerate() {
        edge_ops[i] = l.parse()?;
    }
    Ok(CellSpec::Nb201(Nb201Cell { edge_ops }))
}

fn parse_nb301(body: &str) -> Result<CellSpec> {
    let tuples: Vec<&str> = body.split(';').collect();
    if tuples.len() != NB301_INTERMEDIATE_NODES {
        return Err(Error::Parse(format!(
            "nb301 spec has {} node tuples, expected {NB301_INTERMEDIATE_NODES}",
            tuples.len()
        )));
    }
    let mut nodes = Vec::with_capacity(NB301_INTERMEDIATE_NODES);
    for t in tuples {
        let inner = t
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("nb301 tuple `{t}` not parenthesized")))?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!("nb301 tuple `{t}` needs 4 fields")));
        }
        let a: usize = parts[0]
            .parse()
            .map_err(|_| Error::Parse(format!("nb301 input index `{}`", parts[0])))?;
        let b: usize = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("nb301 input index `{}`", parts[1])))?;
        nodes.push(Nb301NodeSpec {
            inputs: (a, b),
            ops: (parts[2].parse()?, parts[3].parse()?),
        });
    }
    let cell = Nb301Cell {
        nodes: nodes.try_into().expect("length checked"),
    };
    cell.check()?;
    Ok(CellSpec::Nb301(cell))
}

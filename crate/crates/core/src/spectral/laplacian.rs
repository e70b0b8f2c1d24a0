//! Dense symmetric matrices and the normalized graph Laplacian.

use crate::cg::{validate, ComputationGraph};
use crate::error::{Error, Result};

/// Minimal dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let mut m = SquareMatrix::zeros(n);
        for (i, row) in rows.into_iter().enumerate() {
            assert_eq!(row.len(), n, "matrix rows must be square");
            for (j, v) in row.into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.at(i, i)).sum()
    }

    /// Largest absolute difference between the matrix and its transpose.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.at(i, j) - self.at(j, i)).abs());
            }
        }
        worst
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Normalized Laplacian `I - D^(-1/2) A D^(-1/2)` of an undirected simple graph
/// given as neighbor lists. Isolated vertices get an all-zero row, matching the
/// pseudo-inverse convention, so each one contributes a zero eigenvalue.
pub fn normalized_laplacian_from_adjacency(neighbors: &[Vec<usize>]) -> SquareMatrix {
    let n = neighbors.len();
    let degrees: Vec<f64> = neighbors.iter().map(|adj| adj.len() as f64).collect();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        if degrees[i] > 0.0 {
            m.set(i, i, 1.0);
        }
        for &j in &neighbors[i] {
            debug_assert_ne!(i, j, "simple graph has no self-loops");
            m.set(i, j, -1.0 / (degrees[i] * degrees[j]).sqrt());
        }
    }
    m
}

/// Normalized Laplacian of a valid computation graph's undirected skeleton.
/// Exactly symmetric by construction.
pub fn normalized_laplacian(g: &ComputationGraph) -> Result<SquareMatrix> {
    let report = validate(g);
    if !report.ok() {
        return Err(Error::InvalidGraph(report));
    }
    Ok(normalized_laplacian_from_adjacency(&g.undirected_neighbors()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cg::{testutil, Shape};

    fn near(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn two_node_edge() {
        let m = normalized_laplacian_from_adjacency(&[vec![1], vec![0]]);
        near(m.at(0, 0), 1.0);
        near(m.at(1, 1), 1.0);
        near(m.at(0, 1), -1.0);
        near(m.at(1, 0), -1.0);
    }

    #[test]
    fn triangle() {
        let m = normalized_laplacian_from_adjacency(&[vec![1, 2], vec![0, 2], vec![0, 1]]);
        for i in 0..3 {
            near(m.at(i, i), 1.0);
            for j in 0..3 {
                if i != j {
                    near(m.at(i, j), -0.5);
                }
            }
        }
        assert_eq!(m.max_asymmetry(), 0.0);
    }

    #[test]
    fn path_of_three() {
        let m = normalized_laplacian_from_adjacency(&[vec![1], vec![0, 2], vec![1]]);
        let v = 1.0 / 2.0f64.sqrt();
        near(m.at(0, 1), -v);
        near(m.at(1, 2), -v);
        near(m.at(0, 2), 0.0);
        near(m.trace(), 3.0);
    }

    #[test]
    fn graph_wrapper_matches_adjacency_form() {
        let g = testutil::relu_chain(Shape::new(8, 8, 4));
        let a = normalized_laplacian(&g).unwrap();
        let b = normalized_laplacian_from_adjacency(&g.undirected_neighbors());
        assert_eq!(a, b);
    }
}

//! Minimal dense f64 tensor engine with reverse-mode autodiff and Adam.
//!
//! Tensors are two-dimensional (scalars are 1x1, vectors n x 1). Operations are
//! recorded on a [`Tape`] rebuilt every step; [`Tape::backward`] accumulates
//! gradients into a [`ParamStore`]. Everything is sequential f64 with fixed
//! reduction order, so runs are bitwise reproducible.

mod checkpoint;
pub mod gradcheck;
mod params;
mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use params::{AdamConfig, Param, ParamStore};
pub use tape::{Tape, ValueId};

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        Tensor { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor { rows: r, cols: c, data }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_vec(1, 1, vec![v])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn scalar_value(&self) -> f64 {
        assert!(self.is_scalar());
        self.data[0]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// C = A * B.
pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let n = a.rows;
    let m = b.cols;
    debug_assert_eq!(a.cols, b.rows);
    let mut out = Tensor::zeros(n, m);
    for i in 0..n {
        let arow = a.row(i);
        let orow = &mut out.data[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                let brow = &b.data[p * m..(p + 1) * m];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
    out
}

/// C = A * B^T.
pub(crate) fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    let n = a.rows;
    let m = b.rows;
    debug_assert_eq!(a.cols, b.cols);
    let mut out = Tensor::zeros(n, m);
    for i in 0..n {
        let arow = a.row(i);
        for j in 0..m {
            let brow = b.row(j);
            let mut acc = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            out.data[i * m + j] = acc;
        }
    }
    out
}

/// C = A^T * B.
pub(crate) fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let k = a.cols;
    let m = b.cols;
    debug_assert_eq!(a.rows, b.rows);
    let mut out = Tensor::zeros(k, m);
    for i in 0..a.rows {
        let arow = a.row(i);
        let brow = b.row(i);
        for (p, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                let orow = &mut out.data[p * m..(p + 1) * m];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
    out
}

//! Operation tape for reverse-mode differentiation.
//!
//! Forward values are computed eagerly as operations are recorded; the tape is
//! append-only and topologically ordered by construction. A tape lives for one
//! step and is rebuilt per batch, since graph sizes vary.

use super::{matmul, matmul_nt, matmul_tn, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(String),
    MatMul(ValueId, ValueId),
    /// a * b^T
    MatMulNT(ValueId, ValueId),
    Add(ValueId, ValueId),
    /// matrix + broadcast 1 x d row
    AddRow(ValueId, ValueId),
    Sub(ValueId, ValueId),
    /// elementwise product
    Mul(ValueId, ValueId),
    Scale(ValueId, f64),
    Relu(ValueId),
    Sigmoid(ValueId),
    Tanh(ValueId),
    SoftmaxRows(ValueId),
    /// column mean: n x d -> 1 x d
    MeanRows(ValueId),
    SumAll(ValueId),
    ConcatCols(ValueId, ValueId),
    StackRows(Vec<ValueId>),
    L2NormalizeRows(ValueId),
    GatherRows(ValueId, Vec<usize>),
    /// per-target mean of the gathered rows; targets with no entry stay zero
    ScatterMeanRows {
        input: ValueId,
        index: Vec<usize>,
        targets: usize,
    },
    /// row-wise log(sum(exp)) over unmasked entries: n x m -> n x 1
    LogSumExpRowsMasked(ValueId, Vec<bool>),
    /// matrix - broadcast n x 1 column
    SubCol(ValueId, ValueId),
}

struct Entry {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct Tape {
    entries: Vec<Entry>,
    params: Vec<(String, ValueId)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        &self.entries[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> ValueId {
        debug_assert!(value.all_finite(), "non-finite value from {op:?}");
        self.entries.push(Entry { op, value });
        ValueId(self.entries.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> ValueId {
        self.push(Op::Constant, value)
    }

    /// Record a parameter leaf; its gradient flows back into the store under the
    /// same name during [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<ValueId> {
        let value = store.value(name)?.clone();
        let id = self.push(Op::Param(name.to_string()), value);
        self.params.push((name.to_string(), id));
        Ok(id)
    }

    pub fn matmul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if ac != br {
            return Err(Error::dim("matmul", format!("{ar}x{ac} * {br}x{bc}")));
        }
        let out = matmul(self.value(a), self.value(b));
        Ok(self.push(Op::MatMul(a, b), out))
    }

    pub fn matmul_nt(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if ac != bc {
            return Err(Error::dim("matmul_nt", format!("{ar}x{ac} * ({br}x{bc})^T")));
        }
        let out = matmul_nt(self.value(a), self.value(b));
        Ok(self.push(Op::MatMulNT(a, b), out))
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::dim(
                "add",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.push(Op::Add(a, b), out))
    }

    /// `a` is n x d, `row` is 1 x d, broadcast over rows.
    pub fn add_row(&mut self, a: ValueId, row: ValueId) -> Result<ValueId> {
        let (_, ac) = self.value(a).shape();
        let (rr, rc) = self.value(row).shape();
        if rr != 1 || rc != ac {
            return Err(Error::dim("add_row", format!("row {rr}x{rc} for cols {ac}")));
        }
        let a_t = self.value(a);
        let r_t = self.value(row);
        let (n, d) = a_t.shape();
        let mut out = a_t.clone();
        for i in 0..n {
            for j in 0..d {
                out.set(i, j, a_t.at(i, j) + r_t.at(0, j));
            }
        }
        Ok(self.push(Op::AddRow(a, row), out))
    }

    pub fn sub(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::dim(
                "sub",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let mut out = self.value(a).clone();
        for (o, &b_v) in out.data_mut().iter_mut().zip(self.entries[b.0].value.data()) {
            *o -= b_v;
        }
        Ok(self.push(Op::Sub(a, b), out))
    }

    pub fn mul(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::dim(
                "mul",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let mut out = self.value(a).clone();
        for (o, &b_v) in out.data_mut().iter_mut().zip(self.entries[b.0].value.data()) {
            *o *= b_v;
        }
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn scale(&mut self, a: ValueId, factor: f64) -> ValueId {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v *= factor;
        }
        self.push(Op::Scale(a, factor), out)
    }

    pub fn relu(&mut self, a: ValueId) -> ValueId {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = v.max(0.0);
        }
        self.push(Op::Relu(a), out)
    }

    pub fn sigmoid(&mut self, a: ValueId) -> ValueId {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        self.push(Op::Sigmoid(a), out)
    }

    pub fn tanh(&mut self, a: ValueId) -> ValueId {
        let mut out = self.value(a).clone();
        for v in out.data_mut() {
            *v = v.tanh();
        }
        self.push(Op::Tanh(a), out)
    }

    pub fn softmax_rows(&mut self, a: ValueId) -> ValueId {
        let t = self.value(a);
        let (n, d) = t.shape();
        let mut out = Tensor::zeros(n, d);
        for i in 0..n {
            let row = t.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..d {
                let e = (row[j] - max).exp();
                out.set(i, j, e);
                sum += e;
            }
            for j in 0..d {
                out.set(i, j, out.at(i, j) / sum);
            }
        }
        self.push(Op::SoftmaxRows(a), out)
    }

    pub fn mean_rows(&mut self, a: ValueId) -> ValueId {
        let t = self.value(a);
        let (n, d) = t.shape();
        let mut out = Tensor::zeros(1, d);
        for i in 0..n {
            for j in 0..d {
                out.set(0, j, out.at(0, j) + t.at(i, j));
            }
        }
        for j in 0..d {
            out.set(0, j, out.at(0, j) / n as f64);
        }
        self.push(Op::MeanRows(a), out)
    }

    pub fn sum_all(&mut self, a: ValueId) -> ValueId {
        let s: f64 = self.value(a).data().iter().sum();
        self.push(Op::SumAll(a), Tensor::scalar(s))
    }

    pub fn concat_cols(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let (ar, ac) = self.value(a).shape();
        let (br, bc) = self.value(b).shape();
        if ar != br {
            return Err(Error::dim("concat_cols", format!("{ar} rows vs {br} rows")));
        }
        let mut out = Tensor::zeros(ar, ac + bc);
        for i in 0..ar {
            for j in 0..ac {
                out.set(i, j, self.value(a).at(i, j));
            }
            for j in 0..bc {
                out.set(i, ac + j, self.value(b).at(i, j));
            }
        }
        Ok(self.push(Op::ConcatCols(a, b), out))
    }

    /// Stack inputs along rows (all must share a column count).
    pub fn stack_rows(&mut self, parts: &[ValueId]) -> Result<ValueId> {
        if parts.is_empty() {
            return Err(Error::dim("stack_rows", "no inputs".to_string()));
        }
        let cols = self.value(parts[0]).cols();
        let mut rows = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(Error::dim(
                    "stack_rows",
                    format!("{} cols vs {}", t.cols(), cols),
                ));
            }
            for i in 0..t.rows() {
                rows.push(t.row(i).to_vec());
            }
        }
        let out = Tensor::from_rows(rows);
        Ok(self.push(Op::StackRows(parts.to_vec()), out))
    }

    /// Normalize each row to unit Euclidean norm.
    pub fn l2_normalize_rows(&mut self, a: ValueId) -> ValueId {
        let t = self.value(a);
        let (n, d) = t.shape();
        let mut out = Tensor::zeros(n, d);
        for i in 0..n {
            let norm = row_norm(t.row(i));
            assert!(norm > 1e-30, "l2_normalize_rows on a numerically zero row");
            for j in 0..d {
                out.set(i, j, t.at(i, j) / norm);
            }
        }
        self.push(Op::L2NormalizeRows(a), out)
    }

    pub fn gather_rows(&mut self, a: ValueId, index: &[usize]) -> Result<ValueId> {
        let t = self.value(a);
        let (n, d) = t.shape();
        let mut out = Tensor::zeros(index.len(), d);
        for (r, &src) in index.iter().enumerate() {
            if src >= n {
                return Err(Error::dim("gather_rows", format!("row {src} of {n}")));
            }
            for j in 0..d {
                out.set(r, j, t.at(src, j));
            }
        }
        Ok(self.push(Op::GatherRows(a, index.to_vec()), out))
    }

    /// Per-target mean of input rows: `out[t] = mean of rows r with index[r] == t`.
    /// Targets receiving no rows stay zero.
    pub fn scatter_mean_rows(
        &mut self,
        a: ValueId,
        index: &[usize],
        targets: usize,
    ) -> Result<ValueId> {
        let t = self.value(a);
        let (n, d) = t.shape();
        if index.len() != n {
            return Err(Error::dim(
                "scatter_mean_rows",
                format!("{} indices for {n} rows", index.len()),
            ));
        }
        let mut counts = vec![0usize; targets];
        for &ix in index {
            if ix >= targets {
                return Err(Error::dim(
                    "scatter_mean_rows",
                    format!("target {ix} of {targets}"),
                ));
            }
            counts[ix] += 1;
        }
        let mut out = Tensor::zeros(targets, d);
        for (r, &ix) in index.iter().enumerate() {
            for j in 0..d {
                out.set(ix, j, out.at(ix, j) + t.at(r, j));
            }
        }
        for (ix, &cnt) in counts.iter().enumerate() {
            if cnt > 0 {
                for j in 0..d {
                    out.set(ix, j, out.at(ix, j) / cnt as f64);
                }
            }
        }
        Ok(self.push(
            Op::ScatterMeanRows {
                input: a,
                index: index.to_vec(),
                targets,
            },
            out,
        ))
    }

    /// Row-wise log-sum-exp over entries where `mask` is true (mask is row-major
    /// n x m). Every row needs at least one unmasked entry.
    pub fn logsumexp_rows_masked(&mut self, a: ValueId, mask: &[bool]) -> Result<ValueId> {
        let t = self.value(a);
        let (n, m) = t.shape();
        if mask.len() != n * m {
            return Err(Error::dim(
                "logsumexp_rows_masked",
                format!("mask length {} for {n}x{m}", mask.len()),
            ));
        }
        let mut out = Tensor::zeros(n, 1);
        for i in 0..n {
            out.set(i, 0, masked_lse(t.row(i), &mask[i * m..(i + 1) * m])?);
        }
        Ok(self.push(Op::LogSumExpRowsMasked(a, mask.to_vec()), out))
    }

    /// `a` is n x m, `col` is n x 1; out[i][j] = a[i][j] - col[i].
    pub fn sub_col(&mut self, a: ValueId, col: ValueId) -> Result<ValueId> {
        let (n, m) = self.value(a).shape();
        let (cr, cc) = self.value(col).shape();
        if cr != n || cc != 1 {
            return Err(Error::dim("sub_col", format!("column {cr}x{cc} for {n}x{m}")));
        }
        let a_t = self.value(a);
        let c_t = self.value(col);
        let mut out = a_t.clone();
        for i in 0..n {
            for j in 0..m {
                out.set(i, j, a_t.at(i, j) - c_t.at(i, 0));
            }
        }
        Ok(self.push(Op::SubCol(a, col), out))
    }

    /// Accumulate dLoss/dParam for every parameter leaf reachable from `loss`
    /// into the store. `loss` must be scalar.
    pub fn backward(&self, loss: ValueId, store: &mut ParamStore) -> Result<()> {
        if !self.value(loss).is_scalar() {
            let (r, c) = self.value(loss).shape();
            return Err(Error::NonScalarLoss(vec![r, c]));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.entries.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(grad) = grads[idx].take() else { continue };
            debug_assert!(grad.all_finite(), "non-finite gradient at entry {idx}");
            self.propagate(idx, &grad, &mut grads);
            if let Op::Param(name) = &self.entries[idx].op {
                store.accumulate_grad(name, &grad)?;
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let send = |id: ValueId, delta: Tensor, grads: &mut [Option<Tensor>]| {
            match &mut grads[id.0] {
                Some(t) => t.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match &self.entries[idx].op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let da = matmul_nt(g, self.value(*b));
                let db = matmul_tn(self.value(*a), g);
                send(*a, da, grads);
                send(*b, db, grads);
            }
            Op::MatMulNT(a, b) => {
                let da = matmul(g, self.value(*b));
                let db = matmul_tn(g, self.value(*a));
                send(*a, da, grads);
                send(*b, db, grads);
            }
            Op::Add(a, b) => {
                send(*a, g.clone(), grads);
                send(*b, g.clone(), grads);
            }
            Op::AddRow(a, row) => {
                send(*a, g.clone(), grads);
                let (n, d) = g.shape();
                let mut dr = Tensor::zeros(1, d);
                for i in 0..n {
                    for j in 0..d {
                        dr.set(0, j, dr.at(0, j) + g.at(i, j));
                    }
                }
                send(*row, dr, grads);
            }
            Op::Sub(a, b) => {
                send(*a, g.clone(), grads);
                let mut db = g.clone();
                for v in db.data_mut() {
                    *v = -*v;
                }
                send(*b, db, grads);
            }
            Op::Mul(a, b) => {
                let mut da = g.clone();
                for (v, &bv) in da.data_mut().iter_mut().zip(self.value(*b).data()) {
                    *v *= bv;
                }
                let mut db = g.clone();
                for (v, &av) in db.data_mut().iter_mut().zip(self.value(*a).data()) {
                    *v *= av;
                }
                send(*a, da, grads);
                send(*b, db, grads);
            }
            Op::Scale(a, factor) => {
                let mut da = g.clone();
                for v in da.data_mut() {
                    *v *= factor;
                }
                send(*a, da, grads);
            }
            Op::Relu(a) => {
                let y = &self.entries[idx].value;
                let mut da = g.clone();
                for (v, &yv) in da.data_mut().iter_mut().zip(y.data()) {
                    if yv <= 0.0 {
                        *v = 0.0;
                    }
                }
                send(*a, da, grads);
            }
            Op::Sigmoid(a) => {
                let y = &self.entries[idx].value;
                let mut da = g.clone();
                for (v, &yv) in da.data_mut().iter_mut().zip(y.data()) {
                    *v *= yv * (1.0 - yv);
                }
                send(*a, da, grads);
            }
            Op::Tanh(a) => {
                let y = &self.entries[idx].value;
                let mut da = g.clone();
                for (v, &yv) in da.data_mut().iter_mut().zip(y.data()) {
                    *v *= 1.0 - yv * yv;
                }
                send(*a, da, grads);
            }
            Op::SoftmaxRows(a) => {
                let y = &self.entries[idx].value;
                let (n, d) = y.shape();
                let mut da = Tensor::zeros(n, d);
                for i in 0..n {
                    let mut dot = 0.0;
                    for j in 0..d {
                        dot += g.at(i, j) * y.at(i, j);
                    }
                    for j in 0..d {
                        da.set(i, j, y.at(i, j) * (g.at(i, j) - dot));
                    }
                }
                send(*a, da, grads);
            }
            Op::MeanRows(a) => {
                let (n, d) = self.value(*a).shape();
                let mut da = Tensor::zeros(n, d);
                for i in 0..n {
                    for j in 0..d {
                        da.set(i, j, g.at(0, j) / n as f64);
                    }
                }
                send(*a, da, grads);
            }
            Op::SumAll(a) => {
                let (n, d) = self.value(*a).shape();
                let s = g.scalar_value();
                let da = Tensor::from_vec(n, d, vec![s; n * d]);
                send(*a, da, grads);
            }
            Op::ConcatCols(a, b) => {
                let (n, ac) = self.value(*a).shape();
                let (_, bc) = self.value(*b).shape();
                let mut da = Tensor::zeros(n, ac);
                let mut db = Tensor::zeros(n, bc);
                for i in 0..n {
                    for j in 0..ac {
                        da.set(i, j, g.at(i, j));
                    }
                    for j in 0..bc {
                        db.set(i, j, g.at(i, ac + j));
                    }
                }
                send(*a, da, grads);
                send(*b, db, grads);
            }
            Op::StackRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (pr, pc) = self.value(p).shape();
                    let mut dp = Tensor::zeros(pr, pc);
                    for i in 0..pr {
                        for j in 0..pc {
                            dp.set(i, j, g.at(offset + i, j));
                        }
                    }
                    offset += pr;
                    send(p, dp, grads);
                }
            }
            Op::L2NormalizeRows(a) => {
                let x = self.value(*a);
                let y = &self.entries[idx].value;
                let (n, d) = x.shape();
                let mut da = Tensor::zeros(n, d);
                for i in 0..n {
                    let norm = row_norm(x.row(i));
                    let mut dot = 0.0;
                    for j in 0..d {
                        dot += g.at(i, j) * y.at(i, j);
                    }
                    for j in 0..d {
                        da.set(i, j, (g.at(i, j) - dot * y.at(i, j)) / norm);
                    }
                }
                send(*a, da, grads);
            }
            Op::GatherRows(a, index) => {
                let (n, d) = self.value(*a).shape();
                let mut da = Tensor::zeros(n, d);
                for (r, &src) in index.iter().enumerate() {
                    for j in 0..d {
                        da.set(src, j, da.at(src, j) + g.at(r, j));
                    }
                }
                send(*a, da, grads);
            }
            Op::ScatterMeanRows { input, index, targets } => {
                let (n, d) = self.value(*input).shape();
                let mut counts = vec![0usize; *targets];
                for &ix in index {
                    counts[ix] += 1;
                }
                let mut da = Tensor::zeros(n, d);
                for (r, &ix) in index.iter().enumerate() {
                    let c = counts[ix] as f64;
                    for j in 0..d {
                        da.set(r, j, g.at(ix, j) / c);
                    }
                }
                send(*input, da, grads);
            }
            Op::LogSumExpRowsMasked(a, mask) => {
                let x = self.value(*a);
                let (n, m) = x.shape();
                let mut da = Tensor::zeros(n, m);
                for i in 0..n {
                    let row_mask = &mask[i * m..(i + 1) * m];
                    let probs = masked_softmax(x.row(i), row_mask);
                    for j in 0..m {
                        da.set(i, j, g.at(i, 0) * probs[j]);
                    }
                }
                send(*a, da, grads);
            }
            Op::SubCol(a, col) => {
                send(*a, g.clone(), grads);
                let (n, m) = g.shape();
                let mut dc = Tensor::zeros(n, 1);
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..m {
                        s += g.at(i, j);
                    }
                    dc.set(i, 0, -s);
                }
                send(*col, dc, grads);
            }
        }
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn masked_lse(row: &[f64], mask: &[bool]) -> Result<f64> {
    let mut max = f64::NEG_INFINITY;
    for (v, &keep) in row.iter().zip(mask) {
        if keep && *v > max {
            max = *v;
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::dim(
            "logsumexp_rows_masked",
            "a row has no unmasked entries".to_string(),
        ));
    }
    let mut sum = 0.0;
    for (v, &keep) in row.iter().zip(mask) {
        if keep {
            sum += (v - max).exp();
        }
    }
    Ok(max + sum.ln())
}

fn masked_softmax(row: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut max = f64::NEG_INFINITY;
    for (v, &keep) in row.iter().zip(mask) {
        if keep && *v > max {
            max = *v;
        }
    }
    let mut out = vec![0.0; row.len()];
    if max == f64::NEG_INFINITY {
        return out;
    }
    let mut sum = 0.0;
    for (j, (v, &keep)) in row.iter().zip(mask).enumerate() {
        if keep {
            let e = (v - max).exp();
            out[j] = e;
            sum += e;
        }
    }
    for v in &mut out {
        *v /= sum;
    }
    out
}

//! Define-by-run compute tape over dense matrices.
//!
//! Every primitive pushes one node holding its forward value. `backward`
//! walks the tape in exact reverse order and accumulates vector-Jacobian
//! products into per-node gradient buffers, so a value consumed by several
//! branches receives the sum of their contributions.

use super::{Matrix, TensorError};

/// Handle to a node on a [`Graph`]. Only meaningful for the graph that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }

    #[cfg(test)]
    pub(crate) fn from_raw_for_tests(index: usize) -> Var {
        Var(index)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddRow(Var, Var),
    BroadcastRows(Var),
    ConcatCols(Var, Var),
    RowMean(Var),
    ColMean(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    AbsSum(Var),
    Sum(Var),
    Reshape(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::AddRow(..) => "add_row",
            Op::BroadcastRows(..) => "broadcast_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::RowMean(..) => "row_mean",
            Op::ColMean(..) => "col_mean",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::SoftmaxRows(..) => "softmax_rows",
            Op::LogSoftmaxRows(..) => "log_softmax_rows",
            Op::Log(..) => "log",
            Op::Clamp(..) => "clamp",
            Op::AbsSum(..) => "abs_sum",
            Op::Sum(..) => "sum",
            Op::Reshape(..) => "reshape",
        }
    }
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
    label: Option<String>,
}

/// A recorded computation. Build it forward with the primitive methods, then
/// call [`Graph::backward`] once on a scalar loss.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

type Result<T> = std::result::Result<T, TensorError>;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A trainable leaf: gradients are collected for it.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.leaf(value, true)
    }

    /// A non-trainable leaf.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Attaches a human-readable label used in diagnostics.
    pub fn label(&mut self, v: Var, label: impl Into<String>) -> Var {
        self.nodes[v.0].label = Some(label.into());
        v
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// First node whose forward value contains NaN or infinity, as
    /// `(index, op name, label)`.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str, Option<&str>)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !n.value.is_finite())
            .map(|(i, n)| (i, n.op.name(), n.label.as_deref()))
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            label: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, a: Var, value: Matrix, op: Op) -> Var {
        let rg = self.nodes[a.0].requires_grad;
        self.push(value, op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, value: Matrix, op: Op) -> Var {
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        self.push(value, op, rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: sa,
                right: sb,
            });
        }
        let value = self.value(a).matmul(self.value(b));
        Ok(self.binary(a, b, value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.unary(a, value, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).add(self.value(b));
        Ok(self.binary(a, b, value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).sub(self.value(b));
        Ok(self.binary(a, b, value, Op::Sub(a, b)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).hadamard(self.value(b));
        Ok(self.binary(a, b, value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.unary(a, value, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        self.unary(a, value, Op::AddScalar(a))
    }

    /// `a` (n x m) plus the row vector `row` (1 x m) added to every row.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: sa,
                right: sr,
            });
        }
        let r = self.value(row).as_slice().to_vec();
        let mut value = self.value(a).clone();
        for i in 0..sa.0 {
            for (v, b) in value.row_mut(i).iter_mut().zip(&r) {
                *v += b;
            }
        }
        Ok(self.binary(a, row, value, Op::AddRow(a, row)))
    }

    /// Repeats a 1 x m row vector `n` times.
    pub fn broadcast_rows(&mut self, row: Var, n: usize) -> Result<Var> {
        let sr = self.shape(row);
        if sr.0 != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "broadcast_rows",
                left: sr,
                right: (n, sr.1),
            });
        }
        let r = self.value(row).as_slice();
        let mut data = Vec::with_capacity(n * sr.1);
        for _ in 0..n {
            data.extend_from_slice(r);
        }
        let value = Matrix::from_vec(n, sr.1, data);
        Ok(self.unary(row, value, Op::BroadcastRows(row)))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.0 != sb.0 {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                left: sa,
                right: sb,
            });
        }
        let value = self.value(a).hcat(self.value(b));
        Ok(self.binary(a, b, value, Op::ConcatCols(a, b)))
    }

    /// Mean of each row: n x m -> n x 1.
    pub fn row_mean(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let c = m.cols() as f64;
        let value = Matrix::from_vec(
            m.rows(),
            1,
            m.row_sums().into_iter().map(|s| s / c).collect(),
        );
        self.unary(a, value, Op::RowMean(a))
    }

    /// Mean of each column: n x m -> 1 x m.
    pub fn col_mean(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let value = m.col_sums().scale(1.0 / m.rows() as f64);
        self.unary(a, value, Op::ColMean(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.unary(a, value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.unary(a, value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.unary(a, value, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.check_finite("softmax_rows", a)?;
        let m = self.value(a);
        let mut value = m.clone();
        for i in 0..m.rows() {
            let row = value.row_mut(i);
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Ok(self.unary(a, value, Op::SoftmaxRows(a)))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.check_finite("log_softmax_rows", a)?;
        let m = self.value(a);
        let mut value = m.clone();
        for i in 0..m.rows() {
            let row = value.row_mut(i);
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        Ok(self.unary(a, value, Op::LogSoftmaxRows(a)))
    }

    /// Natural log. Every entry must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(&bad) = self
            .value(a)
            .as_slice()
            .iter()
            .find(|&&x| x.is_nan() || x <= 0.0)
        {
            return Err(TensorError::Domain {
                op: "log",
                value: bad,
            });
        }
        let value = self.value(a).map(f64::ln);
        Ok(self.unary(a, value, Op::Log(a)))
    }

    /// Element-wise clamp to `[lo, hi]`; gradient passes only inside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|x| x.clamp(lo, hi));
        self.unary(a, value, Op::Clamp(a, lo, hi))
    }

    /// Sum of absolute values (L1 norm), as a 1x1 matrix.
    pub fn abs_sum(&mut self, a: Var) -> Var {
        let s = self.value(a).as_slice().iter().map(|x| x.abs()).sum();
        self.unary(a, Matrix::scalar(s), Op::AbsSum(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.unary(a, Matrix::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Row-major reinterpretation with the same number of entries.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let sa = self.shape(a);
        if sa.0 * sa.1 != rows * cols {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: sa,
                right: (rows, cols),
            });
        }
        let value = self.value(a).reshaped(rows, cols);
        Ok(self.unary(a, value, Op::Reshape(a)))
    }

    fn check_finite(&self, op: &'static str, a: Var) -> Result<()> {
        match self.value(a).as_slice().iter().find(|x| !x.is_finite()) {
            Some(&bad) => Err(TensorError::Domain { op, value: bad }),
            None => Ok(()),
        }
    }

    /// Reverse pass from a scalar `loss`. Leaves that require gradients but
    /// are unreachable from `loss` receive zero gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(TensorError::EmptyTape);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss { shape });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) && grads[idx].is_none() {
                grads[idx] = Some(Matrix::zeros(node.value.rows(), node.value.cols()));
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        let mut send = |v: Var, contribution: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;

        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    send(a, g.matmul_t(val(b)));
                }
                if wants(b) {
                    send(b, val(a).t_matmul(g));
                }
            }
            Op::Transpose(a) => send(a, g.transpose()),
            Op::Add(a, b) => {
                send(a, g.clone());
                send(b, g.clone());
            }
            Op::Sub(a, b) => {
                send(a, g.clone());
                if wants(b) {
                    send(b, g.scale(-1.0));
                }
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    send(a, g.hadamard(val(b)));
                }
                if wants(b) {
                    send(b, g.hadamard(val(a)));
                }
            }
            Op::Scale(a, c) => send(a, g.scale(c)),
            Op::AddScalar(a) => send(a, g.clone()),
            Op::AddRow(a, row) => {
                send(a, g.clone());
                if wants(row) {
                    send(row, g.col_sums());
                }
            }
            Op::BroadcastRows(row) => send(row, g.col_sums()),
            Op::ConcatCols(a, b) => {
                let ca = val(a).cols();
                let cb = val(b).cols();
                if wants(a) {
                    send(a, Matrix::from_fn(g.rows(), ca, |i, j| g.get(i, j)));
                }
                if wants(b) {
                    send(b, Matrix::from_fn(g.rows(), cb, |i, j| g.get(i, ca + j)));
                }
            }
            Op::RowMean(a) => {
                let (r, c) = val(a).shape();
                send(a, Matrix::from_fn(r, c, |i, _| g.get(i, 0) / c as f64));
            }
            Op::ColMean(a) => {
                let (r, c) = val(a).shape();
                send(a, Matrix::from_fn(r, c, |_, j| g.get(0, j) / r as f64));
            }
            Op::Sigmoid(a) => send(a, g.zip_map(out, |g, y| g * y * (1.0 - y))),
            Op::Tanh(a) => send(a, g.zip_map(out, |g, y| g * (1.0 - y * y))),
            Op::Relu(a) => send(a, g.zip_map(val(a), |g, x| if x > 0.0 { g } else { 0.0 })),
            Op::SoftmaxRows(a) => {
                let mut d = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let dot: f64 = g.row(i).iter().zip(out.row(i)).map(|(g, y)| g * y).sum();
                    for j in 0..out.cols() {
                        d.set(i, j, out.get(i, j) * (g.get(i, j) - dot));
                    }
                }
                send(a, d);
            }
            Op::LogSoftmaxRows(a) => {
                let mut d = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let total: f64 = g.row(i).iter().sum();
                    for j in 0..out.cols() {
                        d.set(i, j, g.get(i, j) - out.get(i, j).exp() * total);
                    }
                }
                send(a, d);
            }
            Op::Log(a) => send(a, g.zip_map(val(a), |g, x| g / x)),
            Op::Clamp(a, lo, hi) => send(
                a,
                g.zip_map(val(a), |g, x| if x >= lo && x <= hi { g } else { 0.0 }),
            ),
            Op::AbsSum(a) => {
                let s = g.item();
                send(
                    a,
                    val(a).map(|x| {
                        if x > 0.0 {
                            s
                        } else if x < 0.0 {
                            -s
                        } else {
                            0.0
                        }
                    }),
                );
            }
            Op::Sum(a) => {
                let (r, c) = val(a).shape();
                send(a, Matrix::filled(r, c, g.item()));
            }
            Op::Reshape(a) => {
                let (r, c) = val(a).shape();
                send(a, g.reshaped(r, c));
            }
        }
    }
}

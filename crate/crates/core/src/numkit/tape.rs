//! Reverse-mode automatic differentiation over dense matrices.
//!
//! Operations are recorded onto a [`Tape`] in execution order; node ids only
//! ever reference earlier nodes, so a single reverse sweep propagates
//! gradients by the chain rule. A tape is confined to one thread; batch
//! parallelism uses one tape per utterance.

use super::matrix::{self, Matrix};
use super::rng::Rng;
use crate::error::NumError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul(NodeId, NodeId),
    /// `a * b^T`
    MatmulTransposeB(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// matrix + broadcast 1 x cols row
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    },
    /// Multiplicative mask sampled at record time (inverted dropout).
    Dropout(NodeId, Matrix),
    ConcatCols(Vec<NodeId>),
    SumAll(NodeId),
}

struct Node {
    op: Op,
    value: Matrix,
    grad: Option<Matrix>,
}

/// Records a computation over matrices and replays it backwards.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            value,
            grad: None,
        });
        id
    }

    /// Registers an input (parameter or data) node.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward root with respect to this node.
    /// `None` if backward has not run or the node is unreachable.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        Ok(self.push(Op::Matmul(a, b), value))
    }

    pub fn matmul_transpose_b(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let value = self.nodes[a.0]
            .value
            .matmul_transpose_b(&self.nodes[b.0].value)?;
        Ok(self.push(Op::MatmulTransposeB(a, b), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let value = self.nodes[a.0].value.add(&self.nodes[b.0].value)?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn add_row_broadcast(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, NumError> {
        let value = self.nodes[a.0]
            .value
            .add_row_broadcast(&self.nodes[row.0].value)?;
        Ok(self.push(Op::AddRow(a, row), value))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.nodes[a.0].value.scale(factor);
        self.push(Op::Scale(a, factor), value)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.relu();
        self.push(Op::Relu(a), value)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId, NumError> {
        let value = matrix::softmax_rows(&self.nodes[a.0].value)?;
        Ok(self.push(Op::SoftmaxRows(a), value))
    }

    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    ) -> Result<NodeId, NumError> {
        let value = matrix::layer_norm(
            &self.nodes[x.0].value,
            &self.nodes[gain.0].value,
            &self.nodes[bias.0].value,
            eps,
        )?;
        Ok(self.push(Op::LayerNorm { x, gain, bias, eps }, value))
    }

    /// Inverted dropout. Returns the input node unchanged in eval mode or at
    /// rate 0, so no tape entry is recorded for the no-op case.
    pub fn dropout(
        &mut self,
        x: NodeId,
        rate: f64,
        rng: &mut Rng,
        training: bool,
    ) -> Result<NodeId, NumError> {
        let shape = self.nodes[x.0].value.shape();
        match matrix::dropout_mask(shape, rate, rng, training)? {
            None => Ok(x),
            Some(mask) => {
                let value = self.nodes[x.0].value.hadamard(&mask)?;
                Ok(self.push(Op::Dropout(x, mask), value))
            }
        }
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NumError> {
        let values: Vec<&Matrix> = parts.iter().map(|id| &self.nodes[id.0].value).collect();
        let value = Matrix::concat_cols(&values)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value))
    }

    /// Sum of all entries as a 1x1 matrix.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let value = Matrix::from_vec(1, 1, vec![self.nodes[a.0].value.sum()]);
        self.push(Op::SumAll(a), value)
    }

    /// Backward pass from a scalar (1x1) root, seeding with 1.
    pub fn backward(&mut self, root: NodeId) -> Result<(), NumError> {
        let shape = self.nodes[root.0].value.shape();
        if shape != (1, 1) {
            return Err(NumError::InvalidParameter {
                what: format!("backward root must be 1x1, got {}x{}", shape.0, shape.1),
            });
        }
        self.backward_seeded(root, Matrix::filled(1, 1, 1.0))
    }

    /// Backward pass seeding the root with an externally computed gradient
    /// (e.g. a loss gradient with respect to logits).
    pub fn backward_seeded(&mut self, root: NodeId, seed: Matrix) -> Result<(), NumError> {
        if seed.shape() != self.nodes[root.0].value.shape() {
            return Err(NumError::ShapeMismatch {
                op: "backward_seeded",
                left: self.nodes[root.0].value.shape(),
                right: seed.shape(),
            });
        }
        for node in self.nodes.iter_mut() {
            node.grad = None;
        }
        self.nodes[root.0].grad = Some(seed);

        for i in (0..=root.0).rev() {
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            self.propagate(i, &g)?;
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, delta: Matrix) {
        match &mut self.nodes[id.0].grad {
            Some(g) => {
                for (gv, dv) in g.data_mut().iter_mut().zip(delta.data()) {
                    *gv += dv;
                }
            }
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, i: usize, g: &Matrix) -> Result<(), NumError> {
        // Ops below i are untouched while propagating, so reading values
        // through immutable borrows before each accumulate is safe.
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (a, b) = (*a, *b);
                let da = g.matmul_transpose_b(&self.nodes[b.0].value)?;
                let db = self.nodes[a.0].value.transpose().matmul(g)?;
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::MatmulTransposeB(a, b) => {
                // c = a b^T: da = g b, db = g^T a
                let (a, b) = (*a, *b);
                let da = g.matmul(&self.nodes[b.0].value)?;
                let db = g.transpose().matmul(&self.nodes[a.0].value)?;
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::AddRow(a, row) => {
                let (a, row) = (*a, *row);
                let mut drow = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        drow.data_mut()[c] += g.get(r, c);
                    }
                }
                self.accumulate(a, g.clone());
                self.accumulate(row, drow);
            }
            Op::Scale(a, factor) => {
                let (a, factor) = (*a, *factor);
                self.accumulate(a, g.scale(factor));
            }
            Op::Relu(a) => {
                let a = *a;
                let mut da = g.clone();
                for (dv, &xv) in da.data_mut().iter_mut().zip(self.nodes[a.0].value.data()) {
                    if xv <= 0.0 {
                        *dv = 0.0;
                    }
                }
                self.accumulate(a, da);
            }
            Op::SoftmaxRows(a) => {
                // dx_i = y_i * (g_i - sum_j g_j y_j), per row
                let a = *a;
                let y = &self.nodes[i].value;
                let mut da = Matrix::zeros(g.rows(), g.cols());
                for r in 0..g.rows() {
                    let dot: f64 = g
                        .row(r)
                        .iter()
                        .zip(y.row(r))
                        .map(|(gv, yv)| gv * yv)
                        .sum();
                    for c in 0..g.cols() {
                        da.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                    }
                }
                self.accumulate(a, da);
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let (x, gain, bias, eps) = (*x, *gain, *bias, *eps);
                let xv = &self.nodes[x.0].value;
                let gv = &self.nodes[gain.0].value;
                let n = xv.cols() as f64;
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                let mut dgain = Matrix::zeros(1, xv.cols());
                let mut dbias = Matrix::zeros(1, xv.cols());
                for r in 0..xv.rows() {
                    let row = xv.row(r);
                    let mean = row.iter().sum::<f64>() / n;
                    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let inv_std = 1.0 / (var + eps).sqrt();
                    // normalized activations and gain-weighted upstream grad
                    let xhat: Vec<f64> = row.iter().map(|v| (v - mean) * inv_std).collect();
                    let gh: Vec<f64> = (0..xv.cols())
                        .map(|c| g.get(r, c) * gv.data()[c])
                        .collect();
                    let gh_mean = gh.iter().sum::<f64>() / n;
                    let gh_dot_xhat = gh.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / n;
                    for c in 0..xv.cols() {
                        let d = inv_std * (gh[c] - gh_mean - xhat[c] * gh_dot_xhat);
                        dx.set(r, c, d);
                        dgain.data_mut()[c] += g.get(r, c) * xhat[c];
                        dbias.data_mut()[c] += g.get(r, c);
                    }
                }
                self.accumulate(x, dx);
                self.accumulate(gain, dgain);
                self.accumulate(bias, dbias);
            }
            Op::Dropout(a, mask) => {
                let a = *a;
                let da = g.hadamard(mask)?;
                self.accumulate(a, da);
            }
            Op::ConcatCols(parts) => {
                let parts = parts.clone();
                let mut offset = 0;
                for p in parts {
                    let pc = self.nodes[p.0].value.cols();
                    let mut dp = Matrix::zeros(g.rows(), pc);
                    for r in 0..g.rows() {
                        for c in 0..pc {
                            dp.set(r, c, g.get(r, offset + c));
                        }
                    }
                    self.accumulate(p, dp);
                    offset += pc;
                }
            }
            Op::SumAll(a) => {
                let a = *a;
                let shape = self.nodes[a.0].value.shape();
                let da = Matrix::filled(shape.0, shape.1, g.get(0, 0));
                self.accumulate(a, da);
            }
        }
        Ok(())
    }
}

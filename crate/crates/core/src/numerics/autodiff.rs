//! Tape-based reverse-mode automatic differentiation over dense matrices.
//!
//! Every operation appends a node to a [`Tape`]; nodes only reference
//! earlier nodes, so the push order is a topological order and the backward
//! pass is a single reverse sweep. Nodes created from [`Tape::constant`] (and
//! everything computed only from constants) are excluded from gradient
//! propagation, which is how detached inputs are expressed.
//!
//! ```
//! use infovgae::numerics::{DenseMatrix, Tape};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(DenseMatrix::from_rows(&[[3.0]]).unwrap());
//! let y = tape.mul(x, x).unwrap();
//! let loss = tape.sum(y);
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(x).unwrap()[(0, 0)], 6.0);
//! ```

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, PairTarget, SparseMatrix};

/// Lower bound used by the clamped logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Output clamp of the stable sigmoid: results lie in `[EPS, 1 - EPS]`.
pub const SIGMOID_EPS: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    SliceRows(Var, usize),
    ConcatRows(Vec<Var>),
    Transpose(Var),
    MaxZero(Var),
    AddRow(Var, Var),
    LeakyRelu(Var, f64),
    /// Parent and the gradient of the scalar output with respect to it.
    PairLoss(Var, Arc<DenseMatrix>),
}

/// Tag naming the operation that produced a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpTag {
    Leaf,
    Constant,
    MatMul,
    SpMM,
    Add,
    Mul,
    Scale,
    Relu,
    Sigmoid,
    Exp,
    Log,
    Sum,
    SliceRows,
    ConcatRows,
    Transpose,
    MaxZero,
    AddRow,
    LeakyRelu,
    PairLoss,
}

struct Node {
    value: DenseMatrix,
    op: Op,
    requires_grad: bool,
    /// Persistent gradient, only kept for leaves.
    grad: Option<DenseMatrix>,
}

/// A recorded computation graph.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: DenseMatrix) -> Var {
        let grad = Some(DenseMatrix::zeros(value.rows(), value.cols()));
        self.push_raw(value, Op::Leaf, true, grad)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push_raw(value, Op::Constant, false, None)
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    pub fn op_tag(&self, v: Var) -> OpTag {
        match self.nodes[v.0].op {
            Op::Leaf => OpTag::Leaf,
            Op::Constant => OpTag::Constant,
            Op::MatMul(..) => OpTag::MatMul,
            Op::SpMM(..) => OpTag::SpMM,
            Op::Add(..) => OpTag::Add,
            Op::Mul(..) => OpTag::Mul,
            Op::Scale(..) => OpTag::Scale,
            Op::Relu(_) => OpTag::Relu,
            Op::Sigmoid(_) => OpTag::Sigmoid,
            Op::Exp(_) => OpTag::Exp,
            Op::Log(_) => OpTag::Log,
            Op::Sum(_) => OpTag::Sum,
            Op::SliceRows(..) => OpTag::SliceRows,
            Op::ConcatRows(_) => OpTag::ConcatRows,
            Op::Transpose(_) => OpTag::Transpose,
            Op::MaxZero(_) => OpTag::MaxZero,
            Op::AddRow(..) => OpTag::AddRow,
            Op::LeakyRelu(..) => OpTag::LeakyRelu,
            Op::PairLoss(..) => OpTag::PairLoss,
        }
    }

    /// Accumulated gradient of a leaf. Constants and interior nodes have none.
    pub fn grad(&self, v: Var) -> Option<&DenseMatrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            if let Some(g) = n.grad.as_mut() {
                g.fill(0.0);
            }
        }
    }

    fn push_raw(
        &mut self,
        value: DenseMatrix,
        op: Op,
        requires_grad: bool,
        grad: Option<DenseMatrix>,
    ) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: DenseMatrix, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push_raw(value, op, requires_grad, None)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    /// Sparse-dense product; the sparse operand is a constant.
    pub fn spmm(&mut self, a: &Arc<SparseMatrix>, b: Var) -> Result<Var> {
        let value = a.spmm(self.value(b))?;
        Ok(self.push(value, Op::SpMM(Arc::clone(a), b), &[b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    /// Adds the `1 x c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (am, bm) = (self.value(a), self.value(b));
        if bm.rows() != 1 || bm.cols() != am.cols() {
            return Err(Error::dim(
                "add_row",
                format!("{}x{} plus row {}x{}", am.rows(), am.cols(), bm.rows(), bm.cols()),
            ));
        }
        let mut value = am.clone();
        for i in 0..value.rows() {
            for (x, y) in value.row_mut(i).iter_mut().zip(bm.row(0)) {
                *x += y;
            }
        }
        Ok(self.push(value, Op::AddRow(a, b), &[a, b]))
    }

    /// `x` for positive entries, `slope * x` otherwise.
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(value, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| c * x);
        self.push(value, Op::Scale(a, c), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a), &[a])
    }

    /// Rectifier applied to sampled latents. Numerically identical to
    /// [`Tape::relu`]; tagged separately so graphs stay readable.
    pub fn max_zero(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::MaxZero(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(stable_sigmoid);
        self.push(value, Op::Sigmoid(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        self.push(value, Op::Exp(a), &[a])
    }

    /// `log(max(x, LOG_FLOOR))`.
    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(LOG_FLOOR).ln());
        self.push(value, Op::Log(a), &[a])
    }

    /// Sum of all entries as a 1x1 matrix.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = DenseMatrix::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a), &[a])
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let value = self.value(a).slice_rows(start, end)?;
        Ok(self.push(value, Op::SliceRows(a, start), &[a]))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&DenseMatrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = DenseMatrix::concat_rows(&values)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), parts))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a), &[a])
    }

    /// Weighted logistic loss of `sigmoid(z zᵀ)` against `target`, as a 1x1
    /// matrix. See [`PairTarget`].
    pub fn pair_loss(&mut self, z: Var, target: &PairTarget) -> Result<Var> {
        let (loss, grad) = target.loss_and_grad(self.value(z))?;
        Ok(self.push(
            DenseMatrix::scalar(loss),
            Op::PairLoss(z, Arc::new(grad)),
            &[z],
        ))
    }

    /// Adds a constant to every entry.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let (r, k) = self.value(a).shape();
        let offset = self.constant(DenseMatrix::full(r, k, c));
        self.add(a, offset)
    }

    /// Elementwise clamp to `[lo, hi]`, written as
    /// `lo + relu(x - lo) - relu(x - hi)`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let below = self.add_scalar(a, -lo)?;
        let below = self.relu(below);
        let above = self.add_scalar(a, -hi)?;
        let above = self.relu(above);
        let above = self.scale(above, -1.0);
        let body = self.add(below, above)?;
        self.add_scalar(body, lo)
    }

    /// Mean of all entries as a 1x1 matrix.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).data().len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Smallest distance of any input of a non-smooth operation from its
    /// kink: zero for relu, leaky relu and the rectifier, `LOG_FLOOR` for
    /// log, and the sigmoid clamp points (including the logits inside
    /// [`Tape::pair_loss`]). Infinite when the tape has none.
    /// Finite-difference checks are only meaningful when the step is well
    /// below this margin.
    pub fn kink_margin(&self) -> f64 {
        let sigmoid_kink = ((1.0 - SIGMOID_EPS) / SIGMOID_EPS).ln();
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            let (input, kinks): (&DenseMatrix, &[f64]) = match &node.op {
                Op::Relu(a) | Op::MaxZero(a) | Op::LeakyRelu(a, _) => (self.value(*a), &[0.0]),
                Op::Log(a) => (self.value(*a), &[LOG_FLOOR]),
                Op::Sigmoid(a) => (self.value(*a), &[-sigmoid_kink, sigmoid_kink]),
                Op::PairLoss(a, _) => {
                    let z = self.value(*a);
                    for i in 0..z.rows() {
                        for j in i..z.rows() {
                            let s: f64 = z.row(i).iter().zip(z.row(j)).map(|(x, y)| x * y).sum();
                            margin = margin.min(sigmoid_kink - s.abs());
                        }
                    }
                    continue;
                }
                _ => continue,
            };
            for &x in input.data() {
                for &k in kinks {
                    margin = margin.min((x - k).abs());
                }
            }
        }
        margin
    }

    /// Propagates `d loss / d node` back to every leaf reachable from `loss`,
    /// adding into the leaves' gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::Contract(format!(
                "backward needs a 1x1 loss, got {r}x{c}"
            )));
        }
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(DenseMatrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            match &op {
                Op::Leaf => {
                    self.nodes[idx]
                        .grad
                        .as_mut()
                        .expect("leaf gradient")
                        .add_assign(&g)?;
                }
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a.0].requires_grad {
                        let ga = g.matmul_nt(self.value(b))?;
                        accumulate(&mut grads, a, ga)?;
                    }
                    if self.nodes[b.0].requires_grad {
                        let gb = self.value(a).matmul_tn(&g)?;
                        accumulate(&mut grads, b, gb)?;
                    }
                }
                Op::SpMM(s, b) => {
                    let gb = s.spmm_transpose(&g)?;
                    accumulate(&mut grads, *b, gb)?;
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[b.0].requires_grad {
                        accumulate(&mut grads, b, g.clone())?;
                    }
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, a, g)?;
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[a.0].requires_grad {
                        let ga = g.zip_map(self.value(b), |x, y| x * y)?;
                        accumulate(&mut grads, a, ga)?;
                    }
                    if self.nodes[b.0].requires_grad {
                        let gb = g.zip_map(self.value(a), |x, y| x * y)?;
                        accumulate(&mut grads, b, gb)?;
                    }
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads, *a, g.map(|x| c * x))?;
                }
                Op::Relu(a) | Op::MaxZero(a) => {
                    let ga = g.zip_map(self.value(*a), |x, input| {
                        if input > 0.0 {
                            x
                        } else {
                            0.0
                        }
                    })?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&self.nodes[idx].value, |x, p| x * p * (1.0 - p))?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Exp(a) => {
                    let ga = g.zip_map(&self.nodes[idx].value, |x, y| x * y)?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Log(a) => {
                    let ga = g.zip_map(self.value(*a), |x, input| {
                        if input > LOG_FLOOR {
                            x / input
                        } else {
                            0.0
                        }
                    })?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads, *a, DenseMatrix::full(r, c, g.data()[0]))?;
                }
                Op::SliceRows(a, start) => {
                    let (r, c) = self.value(*a).shape();
                    let mut ga = DenseMatrix::zeros(r, c);
                    for i in 0..g.rows() {
                        ga.row_mut(start + i).copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        if self.nodes[p.0].requires_grad {
                            accumulate(&mut grads, p, g.slice_rows(offset, offset + rows)?)?;
                        }
                        offset += rows;
                    }
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, g.transpose())?;
                }
                Op::AddRow(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.nodes[b.0].requires_grad {
                        let sums = g.column_sums();
                        accumulate(&mut grads, b, DenseMatrix::from_vec(1, sums.len(), sums)?)?;
                    }
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, a, g)?;
                    }
                }
                Op::LeakyRelu(a, slope) => {
                    let slope = *slope;
                    let ga = g.zip_map(self.value(*a), |x, input| {
                        if input > 0.0 {
                            x
                        } else {
                            slope * x
                        }
                    })?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::PairLoss(a, dz) => {
                    let up = g.data()[0];
                    accumulate(&mut grads, *a, dz.map(|x| up * x))?;
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<DenseMatrix>], v: Var, g: DenseMatrix) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Logistic sigmoid clamped to `[SIGMOID_EPS, 1 - SIGMOID_EPS]`.
pub fn stable_sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(SIGMOID_EPS, 1.0 - SIGMOID_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn kink_margin_reports_closest_input() {
        let mut t = Tape::new();
        assert_eq!(t.kink_margin(), f64::INFINITY);
        let x = t.leaf(m(&[&[-0.3, 0.02, 2.0]]));
        let _ = t.relu(x);
        assert!((t.kink_margin() - 0.02).abs() < 1e-15);
        let y = t.constant(m(&[&[0.01]]));
        let _ = t.log(y);
        assert!((t.kink_margin() - (0.01 - LOG_FLOOR)).abs() < 1e-15);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::new();
        let w = t.leaf(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let loss = t.sum(w);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w).unwrap(), &DenseMatrix::full(2, 2, 1.0));
    }

    #[test]
    fn relu_subgradient() {
        let mut t = Tape::new();
        let w = t.leaf(m(&[&[-1.0, 2.0, 0.0]]));
        let r = t.relu(w);
        let loss = t.sum(r);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(w).unwrap(), &m(&[&[0.0, 1.0, 0.0]]));
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut t = Tape::new();
        let w = t.leaf(m(&[&[0.0]]));
        let s = t.sigmoid(w);
        let loss = t.sum(s);
        t.backward(loss).unwrap();
        assert!((t.grad(w).unwrap()[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let w = t.leaf(DenseMatrix::zeros(2, 1));
        assert!(matches!(t.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn diamond_accumulates_both_paths() {
        let mut t = Tape::new();
        let x = t.leaf(m(&[&[1.5, -2.0]]));
        let sq = t.mul(x, x).unwrap();
        let loss = t.sum(sq);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap(), &m(&[&[3.0, -4.0]]));
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut t = Tape::new();
        let x = t.leaf(m(&[&[2.0]]));
        let y = t.scale(x, 3.0);
        let loss = t.sum(y);
        t.backward(loss).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap()[(0, 0)], 6.0);
        t.zero_grads();
        assert_eq!(t.grad(x).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn constants_receive_nothing() {
        let mut t = Tape::new();
        let x = t.leaf(m(&[&[1.0, 2.0]]));
        let c = t.constant(m(&[&[5.0, 7.0]]));
        let p = t.mul(x, c).unwrap();
        let loss = t.sum(p);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap(), &m(&[&[5.0, 7.0]]));
        assert!(t.grad(c).is_none());
        assert_eq!(t.op_tag(p), OpTag::Mul);
    }

    #[test]
    fn sigmoid_never_saturates() {
        assert_eq!(stable_sigmoid(1e6), 1.0 - SIGMOID_EPS);
        assert_eq!(stable_sigmoid(-1e6), SIGMOID_EPS);
        assert!((1.0 - SIGMOID_EPS).ln().is_finite());
        assert!(stable_sigmoid(-1e6).ln().is_finite());
    }

    #[test]
    fn clamp_matches_reference() {
        let mut t = Tape::new();
        let x = t.constant(m(&[&[-9.0, -6.0, 0.5, 6.0, 7.5]]));
        let c = t.clamp(x, -6.0, 6.0).unwrap();
        assert_eq!(t.value(c), &m(&[&[-6.0, -6.0, 0.5, 6.0, 6.0]]));
    }

    #[test]
    fn slice_and_concat_route_gradients() {
        let mut t = Tape::new();
        let x = t.leaf(m(&[&[1.0], &[2.0], &[3.0]]));
        let top = t.slice_rows(x, 0, 1).unwrap();
        let rest = t.slice_rows(x, 1, 3).unwrap();
        let rest = t.scale(rest, 2.0);
        let joined = t.concat_rows(&[rest, top]).unwrap();
        let tr = t.transpose(joined);
        let loss = t.sum(tr);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap(), &m(&[&[1.0], &[2.0], &[2.0]]));
    }

    mod finite_differences {
        use super::super::*;
        use crate::numerics::{finite_difference_check, GradCheckOptions, PairTarget};
        use proptest::prelude::*;

        /// Entries with magnitude in [0.1, 0.4) or [0.6, 1.0), away from the
        /// kinks of relu, leaky relu, and clamp(-0.5, 0.5).
        fn away_from_kinks(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
            proptest::collection::vec((0.0f64..1.0, proptest::bool::ANY), rows * cols).prop_map(
                move |v| {
                    let data = v
                        .into_iter()
                        .map(|(u, neg)| {
                            let m = if u < 0.5 { 0.1 + 0.6 * u } else { 0.6 + 0.8 * (u - 0.5) };
                            if neg {
                                -m
                            } else {
                                m
                            }
                        })
                        .collect();
                    DenseMatrix::from_vec(rows, cols, data).unwrap()
                },
            )
        }

        const OPS: usize = 18;

        /// `sum(w ⊙ f(x, y))` for the operation numbered `op`.
        fn record(tape: &mut Tape, op: usize, x: Var, y: Var, w: &DenseMatrix) -> Result<Var> {
            let sparse = Arc::new(SparseMatrix::from_triplets(
                3,
                3,
                vec![(0, 0, 0.5), (0, 2, -1.0), (1, 1, 2.0), (2, 0, 0.25)],
            )?);
            let out = match op {
                0 => tape.matmul(x, y)?,
                1 => tape.spmm(&sparse, x)?,
                2 => tape.add(x, y)?,
                3 => tape.mul(x, y)?,
                4 => tape.scale(x, -1.7),
                5 => tape.relu(x),
                6 => tape.max_zero(x),
                7 => tape.sigmoid(x),
                8 => tape.exp(x),
                9 => {
                    let sq = tape.mul(x, x)?;
                    tape.log(sq)
                }
                10 => {
                    let t = tape.transpose(x);
                    tape.matmul(t, y)?
                }
                11 => {
                    let top = tape.slice_rows(x, 1, 3)?;
                    let bottom = tape.slice_rows(y, 0, 1)?;
                    tape.concat_rows(&[bottom, top])?
                }
                12 => {
                    let row = tape.slice_rows(y, 2, 3)?;
                    tape.add_row(x, row)?
                }
                13 => tape.leaky_relu(x, 0.2),
                14 => tape.clamp(x, -0.5, 0.5)?,
                15 => tape.mean(x),
                16 => tape.add_scalar(x, 0.3)?,
                _ => {
                    let target = PairTarget::new(&SparseMatrix::identity(3), 2.0, 1.0)?;
                    let prod = tape.mul(x, y)?;
                    tape.pair_loss(prod, &target)?
                }
            };
            let (r, c) = tape.value(out).shape();
            let weights = tape.constant(DenseMatrix::from_vec(r, c, w.data()[..r * c].to_vec())?);
            let weighted = tape.mul(out, weights)?;
            Ok(tape.sum(weighted))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn every_operation_matches_central_differences(
                op in 0..OPS,
                x in away_from_kinks(3, 3),
                y in away_from_kinks(3, 3),
                w in away_from_kinks(3, 3),
            ) {
                // Clamp outside its bounds is (x - lo) - (x - hi): the zero
                // slope comes from cancellation, so its roundoff needs a wider
                // step. It is piecewise linear and the kinks are 0.1 away.
                let h = if op == 14 { 1e-2 } else { 1e-5 };
                let worst = finite_difference_check(
                    |tape, v| record(tape, op, v[0], v[1], &w),
                    &[x, y],
                    GradCheckOptions { h, ..Default::default() },
                ).unwrap();
                prop_assert!(worst < 1e-6, "op {} error {}", op, worst);
            }
        }
    }
}

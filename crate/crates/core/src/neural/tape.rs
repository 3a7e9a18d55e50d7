//! Reverse-mode differentiation over matrix-valued operations.
//!
//! Operations are appended to a [`Tape`] as they execute; each returns a
//! [`Var`] handle to its output. [`Tape::backward`] walks the tape in reverse
//! from a scalar loss and accumulates vector-Jacobian products into
//! [`Gradients`].

use super::tensor::Tensor;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulTransposed(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Sigmoid(Var),
    ConcatCols(Vec<Var>),
    Softmax(Var),
    WeightedRowSum(Var, Var),
    Bce(Var, Vec<T>),
    Mean(Vec<Var>),
    Sum(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Lower clamp applied to predictions before taking logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op<T>) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{name} (tape node {})", self.nodes.len())));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push("leaf", value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_transposed(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_transposed(self.value(b))?;
        self.push("matmul_transposed", v, Op::MatMulTransposed(a, b))
    }

    /// Adds the `1 × n` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let v = self.value(a).add_row(self.value(bias))?;
        self.push("add_row", v, Op::AddRow(a, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        self.push("add", v, Op::Add(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        self.push("mul", v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var> {
        let v = self.value(a).scale(c);
        self.push("scale", v, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        self.push("relu", v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(sigmoid);
        self.push("sigmoid", v, Op::Sigmoid(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor<T>> = parts.iter().map(|p| self.value(*p)).collect();
        let v = Tensor::concat_cols(&values)?;
        self.push("concat_cols", v, Op::ConcatCols(parts.to_vec()))
    }

    /// Row-wise softmax; masked columns come out as exact zeros.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let v = self.value(a).masked_softmax_rows(mask)?;
        self.push("softmax", v, Op::Softmax(a))
    }

    /// `alpha · values` with an order-independent reduction over rows.
    pub fn weighted_row_sum(&mut self, alpha: Var, values: Var) -> Result<Var> {
        let v = Tensor::weighted_row_sum(self.value(alpha), self.value(values))?;
        self.push("weighted_row_sum", v, Op::WeightedRowSum(alpha, values))
    }

    /// Mean binary cross-entropy of a `1 × E` prediction against `target`.
    pub fn bce(&mut self, pred: Var, target: &[T]) -> Result<Var> {
        let p = self.value(pred);
        if p.rows() != 1 || p.cols() != target.len() {
            return Err(Error::Shape {
                op: "bce",
                left: p.shape(),
                right: [1, target.len()],
            });
        }
        let loss = bce_value(p.data(), target);
        self.push("bce", Tensor::scalar(loss), Op::Bce(pred, target.to_vec()))
    }

    /// Mean of `1 × 1` values.
    pub fn mean(&mut self, scalars: &[Var]) -> Result<Var> {
        if scalars.is_empty() {
            return Err(Error::InvalidParameter("mean of zero values".into()));
        }
        let mut acc = T::zero();
        for s in scalars {
            acc += self.value(*s).item().ok_or_else(|| Error::Shape {
                op: "mean",
                left: [1, 1],
                right: self.value(*s).shape(),
            })?;
        }
        let v = acc / T::from_usize(scalars.len()).expect("count fits");
        self.push("mean", Tensor::scalar(v), Op::Mean(scalars.to_vec()))
    }

    /// Sum of all elements.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let mut acc = T::zero();
        for &x in self.value(a).data() {
            acc += x;
        }
        self.push("sum", Tensor::scalar(acc), Op::Sum(a))
    }

    /// On/off state of every ReLU unit recorded so far, in tape order.
    pub fn relu_signature(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(a),
                _ => None,
            })
            .flat_map(|a| self.value(a).data().iter().map(|&x| x > T::zero()))
            .collect()
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let node = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| Error::Backward("loss was not recorded on this tape".into()))?;
        if node.value.shape() != [1, 1] {
            return Err(Error::Backward(format!(
                "loss must be 1x1, got {:?}",
                node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul_transposed(self.value(*b))?;
                    let db = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::MatMulTransposed(a, b) => {
                    let da = g.matmul(self.value(*b))?;
                    let db = g.transpose().matmul(self.value(*a))?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::AddRow(a, bias) => {
                    let mut db = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, &x) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    accumulate(&mut grads, *bias, db)?;
                    accumulate(&mut grads, *a, g.clone())?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g.clone())?;
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.value(*b), "mul'", |x, y| x * y)?;
                    let db = g.zip_map(self.value(*a), "mul'", |x, y| x * y)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.scale(*c))?;
                }
                Op::Relu(a) => {
                    let da = g.zip_map(
                        self.value(*a),
                        "relu'",
                        |x, pre| {
                            if pre > T::zero() {
                                x
                            } else {
                                T::zero()
                            }
                        },
                    )?;
                    accumulate(&mut grads, *a, da)?;
                }
                Op::Sigmoid(a) => {
                    let da = g.zip_map(&node.value, "sigmoid'", |x, y| x * y * (T::one() - y))?;
                    accumulate(&mut grads, *a, da)?;
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let width = self.value(*p).cols();
                        let mut dp = Tensor::zeros(g.rows(), width);
                        for r in 0..g.rows() {
                            for c in 0..width {
                                dp.set(r, c, g.get(r, offset + c));
                            }
                        }
                        offset += width;
                        accumulate(&mut grads, *p, dp)?;
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut da = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let mut dot = T::zero();
                        for (&gy, &yy) in g.row(r).iter().zip(y.row(r)) {
                            dot += gy * yy;
                        }
                        for c in 0..y.cols() {
                            da.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::WeightedRowSum(alpha, values) => {
                    let v = self.value(*values);
                    let al = self.value(*alpha);
                    let dalpha = g.matmul_transposed(v)?;
                    let mut dv = Tensor::zeros(v.rows(), v.cols());
                    for j in 0..v.rows() {
                        let aj = al.get(0, j);
                        for c in 0..v.cols() {
                            dv.set(j, c, aj * g.get(0, c));
                        }
                    }
                    accumulate(&mut grads, *alpha, dalpha)?;
                    accumulate(&mut grads, *values, dv)?;
                }
                Op::Bce(pred, target) => {
                    let upstream = g.get(0, 0);
                    let p = self.value(*pred);
                    let lo = T::of(BCE_EPSILON);
                    let hi = T::one() - lo;
                    let n = T::from_usize(target.len()).expect("count fits");
                    let dp = Tensor::row_vector(
                        p.data()
                            .iter()
                            .zip(target)
                            .map(|(&pv, &y)| {
                                if pv < lo || pv > hi {
                                    T::zero()
                                } else {
                                    upstream * (pv - y) / (pv * (T::one() - pv)) / n
                                }
                            })
                            .collect(),
                    );
                    accumulate(&mut grads, *pred, dp)?;
                }
                Op::Mean(items) => {
                    let share = g.get(0, 0) / T::from_usize(items.len()).expect("count fits");
                    for s in items {
                        accumulate(&mut grads, *s, Tensor::scalar(share))?;
                    }
                }
                Op::Sum(a) => {
                    let shape = self.value(*a).shape();
                    accumulate(&mut grads, *a, Tensor::filled(shape[0], shape[1], g.get(0, 0)))?;
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn bce_value<T: Scalar>(pred: &[T], target: &[T]) -> T {
    let lo = T::of(BCE_EPSILON);
    let hi = T::one() - lo;
    let mut acc = T::zero();
    for (&p, &y) in pred.iter().zip(target) {
        let p = p.max(lo).min(hi);
        acc += -(y * p.ln() + (T::one() - y) * (T::one() - p).ln());
    }
    acc / T::from_usize(pred.len()).expect("count fits")
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for `v`, or `None` when the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zero-filled to `like`'s shape when absent.
    pub fn wrt(&self, v: Var, like: &Tensor<T>) -> Tensor<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut tape = Tape::<f64>::new();
        let w = tape.leaf(Tensor::scalar(3.0)).unwrap();
        let sq = tape.mul(w, w).unwrap();
        let grads = tape.backward(sq).unwrap();
        assert_eq!(grads.get(w).unwrap().item(), Some(6.0));
    }

    #[test]
    fn logistic_gradient_is_p_minus_y_times_x() {
        let (x, w0, y) = (1.7, -0.4, 1.0);
        let mut tape = Tape::<f64>::new();
        let xv = tape.leaf(Tensor::scalar(x)).unwrap();
        let w = tape.leaf(Tensor::scalar(w0)).unwrap();
        let z = tape.matmul(xv, w).unwrap();
        let p = tape.sigmoid(z).unwrap();
        let loss = tape.bce(p, &[y]).unwrap();
        let grads = tape.backward(loss).unwrap();
        let pv = sigmoid(x * w0);
        assert!((grads.get(w).unwrap().item().unwrap() - (pv - y) * x).abs() < 1e-12);
    }

    #[test]
    fn backward_needs_recorded_loss() {
        let tape = Tape::<f64>::new();
        let mut other = Tape::<f64>::new();
        let v = other.leaf(Tensor::scalar(1.0)).unwrap();
        assert!(matches!(tape.backward(v), Err(Error::Backward(_))));
    }

    #[test]
    fn backward_needs_scalar_loss() {
        let mut tape = Tape::<f64>::new();
        let v = tape.leaf(Tensor::zeros(2, 2)).unwrap();
        assert!(matches!(tape.backward(v), Err(Error::Backward(_))));
    }

    #[test]
    fn non_finite_forward_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::scalar(f64::MAX)).unwrap();
        assert!(matches!(tape.add(a, a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::scalar(2.0)).unwrap();
        let b = tape.leaf(Tensor::scalar(5.0)).unwrap();
        let s = tape.sum(a).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.get(b).is_none());
        assert_eq!(g.wrt(b, &Tensor::scalar(0.0)).item(), Some(0.0));
    }
}

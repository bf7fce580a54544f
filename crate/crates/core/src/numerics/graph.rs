//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] records every primitive applied to its nodes together with the
//! forward value. Nodes are appended in evaluation order, so the node index
//! is already a topological order; [`Graph::backward`] walks it in reverse and
//! visits every node at most once.
//!
//! ```
//! use patdiag_core::numerics::{Graph, Tensor};
//!
//! let mut g = Graph::without_params();
//! let x = g.input(Tensor::scalar(3.0));
//! let y = g.mul(x, x);
//! let grads = g.backward(y).unwrap();
//! assert_eq!(grads.wrt(x).unwrap().item(), 6.0);
//! ```

use std::sync::atomic::{AtomicU64, Ordering};

use super::{NumericsError, ParamId, ParamSet, Tensor};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node of a particular [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    idx: usize,
    graph: u64,
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Lookup { param: ParamId, row: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddCol(usize, usize),
    MatMul(usize, usize),
    MatVec(usize, usize),
    VecMat(usize, usize),
    Tanh(usize),
    Sigmoid(usize),
    Exp(usize),
    Log(usize),
    Softplus(usize),
    Concat(Vec<usize>),
    StackCols(Vec<usize>),
    Column(usize, usize),
    Slice { src: usize, start: usize },
    Sum(usize),
    Dot(usize, usize),
    Softmax(usize),
}

struct Node {
    op: Op,
    // `None` for parameter leaves, whose value lives in the borrowed ParamSet.
    value: Option<Tensor>,
}

/// Recorded computation over one set of parameters.
pub struct Graph<'p> {
    id: u64,
    params: Option<&'p ParamSet>,
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    graph: u64,
    nodes: Vec<Option<Tensor>>,
    params: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the output with respect to `v`, if `v` influenced it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        if v.graph != self.graph {
            return None;
        }
        self.nodes.get(v.idx).and_then(Option::as_ref)
    }

    /// Gradient with respect to a parameter, if it was used.
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(id.0).and_then(Option::as_ref)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Graph<'static> {
    /// A graph with no parameter leaves (inputs only).
    pub fn without_params() -> Self {
        Graph {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            params: None,
            nodes: Vec::new(),
        }
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            params: Some(params),
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> usize {
        assert_eq!(v.graph, self.id, "node belongs to a different graph");
        v.idx
    }

    fn push(&mut self, op: Op, value: Option<Tensor>) -> Var {
        self.nodes.push(Node { op, value });
        Var {
            idx: self.nodes.len() - 1,
            graph: self.id,
        }
    }

    fn val(&self, idx: usize) -> &Tensor {
        let node = &self.nodes[idx];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self
                .params
                .expect("parameter node without parameter set")
                .get(*id),
            _ => unreachable!("node without value"),
        }
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        let idx = self.check(v);
        self.val(idx)
    }

    /// Constant leaf.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, Some(t))
    }

    /// Leaf bound to a parameter tensor.
    pub fn param(&mut self, id: ParamId) -> Var {
        let params = self.params.expect("graph has no parameter set");
        assert!(id.0 < params.len(), "unknown parameter");
        self.push(Op::Param(id), None)
    }

    /// Row `row` of a matrix parameter, as a vector (embedding lookup).
    pub fn lookup(&mut self, id: ParamId, row: usize) -> Var {
        let table = self.params.expect("graph has no parameter set").get(id);
        assert!(
            table.is_matrix() && row < table.rows(),
            "lookup out of range"
        );
        let value = Tensor::from_parts(vec![table.cols()], table.row(row).to_vec());
        self.push(Op::Lookup { param: id, row }, Some(value))
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (ia, ib) = (self.check(a), self.check(b));
        let (ta, tb) = (self.val(ia), self.val(ib));
        assert_eq!(ta.shape(), tb.shape(), "elementwise shape mismatch");
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::from_parts(ta.shape().to_vec(), data);
        self.push(op, Some(value))
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let ia = self.check(a);
        let ta = self.val(ia);
        let value = Tensor::from_parts(
            ta.shape().to_vec(),
            ta.data().iter().map(|&x| f(x)).collect(),
        );
        self.push(op, Some(value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Add(a.idx, b.idx), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Sub(a.idx, b.idx), |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Mul(a.idx, b.idx), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::Scale(a.idx, c), |x| c * x)
    }

    /// Adds vector `v` (length r) to every column of matrix `m` (r x c).
    pub fn add_col(&mut self, m: Var, v: Var) -> Var {
        let (im, iv) = (self.check(m), self.check(v));
        let (tm, tv) = (self.val(im), self.val(iv));
        assert!(
            tm.is_matrix() && tv.is_vector() && tv.len() == tm.rows(),
            "add_col shape mismatch"
        );
        let cols = tm.cols();
        let data = tm
            .data()
            .iter()
            .enumerate()
            .map(|(k, &x)| x + tv.data()[k / cols])
            .collect();
        let value = Tensor::from_parts(tm.shape().to_vec(), data);
        self.push(Op::AddCol(im, iv), Some(value))
    }

    /// Matrix product (m x k)(k x n).
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ia, ib) = (self.check(a), self.check(b));
        let (ta, tb) = (self.val(ia), self.val(ib));
        assert!(
            ta.is_matrix() && tb.is_matrix() && ta.cols() == tb.rows(),
            "matmul shape mismatch"
        );
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        let (ad, bd) = (ta.data(), tb.data());
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ad[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        self.push(
            Op::MatMul(ia, ib),
            Some(Tensor::from_parts(vec![m, n], out)),
        )
    }

    /// Matrix-vector product (m x k)(k) -> (m).
    pub fn matvec(&mut self, a: Var, v: Var) -> Var {
        let (ia, iv) = (self.check(a), self.check(v));
        let (ta, tv) = (self.val(ia), self.val(iv));
        assert!(
            ta.is_matrix() && tv.is_vector() && ta.cols() == tv.len(),
            "matvec shape mismatch"
        );
        let k = ta.cols();
        let out = ta
            .data()
            .chunks_exact(k)
            .map(|row| row.iter().zip(tv.data()).map(|(x, y)| x * y).sum())
            .collect();
        self.push(
            Op::MatVec(ia, iv),
            Some(Tensor::from_parts(vec![ta.rows()], out)),
        )
    }

    /// Vector-matrix product (k)(k x n) -> (n).
    pub fn vecmat(&mut self, v: Var, a: Var) -> Var {
        let (iv, ia) = (self.check(v), self.check(a));
        let (tv, ta) = (self.val(iv), self.val(ia));
        assert!(
            ta.is_matrix() && tv.is_vector() && ta.rows() == tv.len(),
            "vecmat shape mismatch"
        );
        let n = ta.cols();
        let mut out = vec![0.0; n];
        for (p, &vp) in tv.data().iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(ta.row(p)) {
                *o += vp * x;
            }
        }
        self.push(Op::VecMat(iv, ia), Some(Tensor::from_parts(vec![n], out)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a.idx), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a.idx), sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Op::Exp(a.idx), f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, Op::Log(a.idx), f64::ln)
    }

    /// `ln(1 + e^x)`, elementwise.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, Op::Softplus(a.idx), softplus)
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let idx: Vec<usize> = parts.iter().map(|&p| self.check(p)).collect();
        let mut data = Vec::new();
        for &i in &idx {
            let t = self.val(i);
            assert!(t.is_vector(), "concat expects vectors");
            data.extend_from_slice(t.data());
        }
        let n = data.len();
        self.push(Op::Concat(idx), Some(Tensor::from_parts(vec![n], data)))
    }

    /// Stacks equal-length vectors as the columns of a matrix.
    pub fn stack_cols(&mut self, cols: &[Var]) -> Var {
        assert!(!cols.is_empty(), "stack of nothing");
        let idx: Vec<usize> = cols.iter().map(|&c| self.check(c)).collect();
        let r = self.val(idx[0]).len();
        let n = idx.len();
        let mut data = vec![0.0; r * n];
        for (j, &i) in idx.iter().enumerate() {
            let t = self.val(i);
            assert!(t.is_vector() && t.len() == r, "stack_cols length mismatch");
            for (k, &x) in t.data().iter().enumerate() {
                data[k * n + j] = x;
            }
        }
        self.push(
            Op::StackCols(idx),
            Some(Tensor::from_parts(vec![r, n], data)),
        )
    }

    /// Column `j` of a matrix.
    pub fn column(&mut self, m: Var, j: usize) -> Var {
        let im = self.check(m);
        let tm = self.val(im);
        assert!(tm.is_matrix() && j < tm.cols(), "column out of range");
        let value = Tensor::from_parts(vec![tm.rows()], tm.column(j));
        self.push(Op::Column(im, j), Some(value))
    }

    /// Contiguous sub-vector `[start, start + len)`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let ia = self.check(a);
        let ta = self.val(ia);
        assert!(
            ta.is_vector() && len > 0 && start + len <= ta.len(),
            "slice out of range"
        );
        let value = Tensor::from_parts(vec![len], ta.data()[start..start + len].to_vec());
        self.push(Op::Slice { src: ia, start }, Some(value))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let ia = self.check(a);
        let s = self.val(ia).data().iter().sum();
        self.push(Op::Sum(ia), Some(Tensor::scalar(s)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (ia, ib) = (self.check(a), self.check(b));
        let (ta, tb) = (self.val(ia), self.val(ib));
        assert_eq!(ta.len(), tb.len(), "dot length mismatch");
        let s = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).sum();
        self.push(Op::Dot(ia, ib), Some(Tensor::scalar(s)))
    }

    /// Softmax of a vector, shifted by its maximum.
    pub fn softmax(&mut self, a: Var) -> Var {
        let ia = self.check(a);
        let ta = self.val(ia);
        assert!(ta.is_vector(), "softmax expects a vector");
        let max = ta.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = ta.data().iter().map(|&x| (x - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let data = exps.into_iter().map(|e| e / z).collect();
        self.push(
            Op::Softmax(ia),
            Some(Tensor::from_parts(ta.shape().to_vec(), data)),
        )
    }

    /// Gradients of the scalar `output` with respect to every node and parameter.
    pub fn backward(&self, output: Var) -> Result<Gradients, NumericsError> {
        if output.graph != self.id || output.idx >= self.nodes.len() {
            return Err(NumericsError::DetachedNode);
        }
        let out_shape = self.val(output.idx).shape().to_vec();
        if self.val(output.idx).len() != 1 {
            return Err(NumericsError::NonScalarOutput(out_shape));
        }
        let n_params = self.params.map_or(0, ParamSet::len);
        let mut pending: Vec<Option<Vec<f64>>> = vec![None; output.idx + 1];
        let mut done: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut pgrads: Vec<Option<Vec<f64>>> = vec![None; n_params];
        pending[output.idx] = Some(vec![1.0]);

        for i in (0..=output.idx).rev() {
            let Some(g) = pending[i].take() else { continue };
            self.propagate(i, &g, &mut pending, &mut pgrads);
            done[i] = Some(Tensor::from_parts(self.val(i).shape().to_vec(), g));
        }

        let params = pgrads
            .into_iter()
            .enumerate()
            .map(|(k, g)| {
                g.map(|data| {
                    let shape = self.params.unwrap().get(ParamId(k)).shape().to_vec();
                    Tensor::from_parts(shape, data)
                })
            })
            .collect();
        Ok(Gradients {
            graph: self.id,
            nodes: done,
            params,
        })
    }

    fn propagate(
        &self,
        i: usize,
        g: &[f64],
        pending: &mut [Option<Vec<f64>>],
        pgrads: &mut [Option<Vec<f64>>],
    ) {
        let y = self.val(i).data();
        let mut acc = |idx: usize, f: &mut dyn FnMut(&mut [f64])| {
            let len = self.val(idx).len();
            let slot = pending[idx].get_or_insert_with(|| vec![0.0; len]);
            f(slot);
        };
        match &self.nodes[i].op {
            Op::Input => {}
            Op::Param(id) => {
                let len = self.val(i).len();
                let slot = pgrads[id.0].get_or_insert_with(|| vec![0.0; len]);
                slot.iter_mut().zip(g).for_each(|(s, x)| *s += x);
            }
            Op::Lookup { param, row } => {
                let table = self.params.unwrap().get(*param);
                let cols = table.cols();
                let slot = pgrads[param.0].get_or_insert_with(|| vec![0.0; table.len()]);
                slot[row * cols..(row + 1) * cols]
                    .iter_mut()
                    .zip(g)
                    .for_each(|(s, x)| *s += x);
            }
            &Op::Add(a, b) => {
                acc(a, &mut |s| s.iter_mut().zip(g).for_each(|(s, x)| *s += x));
                acc(b, &mut |s| s.iter_mut().zip(g).for_each(|(s, x)| *s += x));
            }
            &Op::Sub(a, b) => {
                acc(a, &mut |s| s.iter_mut().zip(g).for_each(|(s, x)| *s += x));
                acc(b, &mut |s| s.iter_mut().zip(g).for_each(|(s, x)| *s -= x));
            }
            &Op::Mul(a, b) => {
                let (va, vb) = (self.val(a).data(), self.val(b).data());
                acc(a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * vb[k];
                    }
                });
                acc(b, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * va[k];
                    }
                });
            }
            &Op::Scale(a, c) => acc(a, &mut |s| {
                s.iter_mut().zip(g).for_each(|(s, x)| *s += c * x)
            }),
            &Op::AddCol(m, v) => {
                let cols = self.val(m).cols();
                acc(m, &mut |s| s.iter_mut().zip(g).for_each(|(s, x)| *s += x));
                acc(v, &mut |s| {
                    for (r, sr) in s.iter_mut().enumerate() {
                        *sr += g[r * cols..(r + 1) * cols].iter().sum::<f64>();
                    }
                });
            }
            &Op::MatMul(a, b) => {
                let (ta, tb) = (self.val(a), self.val(b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                let (ad, bd) = (ta.data(), tb.data());
                // dA = G B^T
                acc(a, &mut |s| {
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            s[r * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                // dB = A^T G
                acc(b, &mut |s| {
                    for r in 0..m {
                        let grow = &g[r * n..(r + 1) * n];
                        for p in 0..k {
                            let arp = ad[r * k + p];
                            if arp == 0.0 {
                                continue;
                            }
                            for (sv, &gv) in s[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *sv += arp * gv;
                            }
                        }
                    }
                });
            }
            &Op::MatVec(a, v) => {
                let (ta, tv) = (self.val(a), self.val(v));
                let k = ta.cols();
                let (ad, vd) = (ta.data(), tv.data());
                acc(a, &mut |s| {
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        for (sv, &x) in s[r * k..(r + 1) * k].iter_mut().zip(vd) {
                            *sv += gr * x;
                        }
                    }
                });
                acc(v, &mut |s| {
                    for (r, &gr) in g.iter().enumerate() {
                        for (sv, &x) in s.iter_mut().zip(&ad[r * k..(r + 1) * k]) {
                            *sv += gr * x;
                        }
                    }
                });
            }
            &Op::VecMat(v, a) => {
                let (tv, ta) = (self.val(v), self.val(a));
                let n = ta.cols();
                let vd = tv.data();
                acc(v, &mut |s| {
                    for (p, sp) in s.iter_mut().enumerate() {
                        *sp += ta.row(p).iter().zip(g).map(|(x, y)| x * y).sum::<f64>();
                    }
                });
                acc(a, &mut |s| {
                    for (p, &vp) in vd.iter().enumerate() {
                        for (sv, &gj) in s[p * n..(p + 1) * n].iter_mut().zip(g) {
                            *sv += vp * gj;
                        }
                    }
                });
            }
            &Op::Tanh(a) => acc(a, &mut |s| {
                for k in 0..s.len() {
                    s[k] += g[k] * (1.0 - y[k] * y[k]);
                }
            }),
            &Op::Sigmoid(a) => acc(a, &mut |s| {
                for k in 0..s.len() {
                    s[k] += g[k] * y[k] * (1.0 - y[k]);
                }
            }),
            &Op::Exp(a) => acc(a, &mut |s| {
                for k in 0..s.len() {
                    s[k] += g[k] * y[k];
                }
            }),
            &Op::Log(a) => {
                let va = self.val(a).data();
                acc(a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] / va[k];
                    }
                })
            }
            &Op::Softplus(a) => {
                let va = self.val(a).data();
                acc(a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * sigmoid(va[k]);
                    }
                })
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.val(p).len();
                    acc(p, &mut |s| {
                        s.iter_mut()
                            .zip(&g[offset..offset + len])
                            .for_each(|(s, x)| *s += x)
                    });
                    offset += len;
                }
            }
            Op::StackCols(cols) => {
                let n = cols.len();
                for (j, &c) in cols.iter().enumerate() {
                    acc(c, &mut |s| {
                        for (r, sr) in s.iter_mut().enumerate() {
                            *sr += g[r * n + j];
                        }
                    });
                }
            }
            &Op::Column(m, j) => {
                let n = self.val(m).cols();
                acc(m, &mut |s| {
                    for (r, &gr) in g.iter().enumerate() {
                        s[r * n + j] += gr;
                    }
                });
            }
            &Op::Slice { src, start } => acc(src, &mut |s| {
                s[start..start + g.len()]
                    .iter_mut()
                    .zip(g)
                    .for_each(|(s, x)| *s += x)
            }),
            &Op::Sum(a) => acc(a, &mut |s| s.iter_mut().for_each(|s| *s += g[0])),
            &Op::Dot(a, b) => {
                let (va, vb) = (self.val(a).data(), self.val(b).data());
                acc(a, &mut |s| {
                    s.iter_mut().zip(vb).for_each(|(s, x)| *s += g[0] * x)
                });
                acc(b, &mut |s| {
                    s.iter_mut().zip(va).for_each(|(s, x)| *s += g[0] * x)
                });
            }
            &Op::Softmax(a) => {
                let gy: f64 = g.iter().zip(y).map(|(x, y)| x * y).sum();
                acc(a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += y[k] * (g[k] - gy);
                    }
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let mut g = Graph::without_params();
        let x = g.input(Tensor::scalar(3.0));
        let y = g.mul(x, x);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.wrt(x).unwrap().item(), 6.0);
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        let mut g = Graph::without_params();
        let x = g.input(Tensor::scalar(0.0));
        let y = g.sigmoid(x);
        assert_eq!(g.value(y).item(), 0.5);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.wrt(x).unwrap().item(), 0.25);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::without_params();
        let x = g.input(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let y = g.tanh(x);
        assert!(matches!(
            g.backward(y),
            Err(NumericsError::NonScalarOutput(_))
        ));
    }

    #[test]
    fn foreign_node_is_detached() {
        let mut g1 = Graph::without_params();
        let mut g2 = Graph::without_params();
        let _ = g1.input(Tensor::scalar(1.0));
        let x2 = g2.input(Tensor::scalar(1.0));
        let y2 = g2.exp(x2);
        assert!(matches!(g1.backward(y2), Err(NumericsError::DetachedNode)));
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let u = vec![0.3, -1.2, 4.0, 2.5];
        let mut g = Graph::without_params();
        let a = g.input(Tensor::vector(u.clone()).unwrap());
        let b = g.input(Tensor::vector(u.iter().map(|x| x + 123.0).collect()).unwrap());
        let sa = g.softmax(a);
        let sb = g.softmax(b);
        let total: f64 = g.value(sa).data().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (x, y) in g.value(sa).data().iter().zip(g.value(sb).data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn unused_nodes_get_no_gradient() {
        let mut g = Graph::without_params();
        let x = g.input(Tensor::scalar(2.0));
        let unused = g.input(Tensor::scalar(5.0));
        let y = g.exp(x);
        let grads = g.backward(y).unwrap();
        assert!(grads.wrt(unused).is_none());
    }
}

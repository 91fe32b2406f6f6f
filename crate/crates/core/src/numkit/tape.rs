//! Reverse-mode gradient accumulation over vector-valued primitives.
//!
//! A [`Tape`] records every primitive applied during a forward pass.
//! [`Tape::backward`] replays the record in reverse, accumulating
//! gradients into a [`GradientLedger`] keyed by parameter identity.
//! Parameters used at several timesteps (the shared recurrence weights)
//! receive the sum of their per-step contributions.

use super::{Matrix, NumError};

/// Handle to a parameter registered in a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Named collection of learned matrices. Registration order is part of
/// the model's deterministic identity: ledgers and serializers walk the
/// set in that order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Matrix) -> ParamId {
        self.names.push(name.to_string());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// A ledger of zero gradients, one buffer per parameter.
    pub fn zero_ledger(&self) -> GradientLedger {
        GradientLedger {
            grads: self
                .values
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    /// `p <- p - lr * g` for every parameter.
    pub fn sgd_step(&mut self, grads: &GradientLedger, lr: f64) -> Result<(), NumError> {
        if grads.grads.len() != self.values.len() {
            return Err(NumError::ShapeMismatch {
                op: "sgd_step",
                expected: format!("{} gradient buffers", self.values.len()),
                got: format!("{}", grads.grads.len()),
            });
        }
        for (value, grad) in self.values.iter_mut().zip(&grads.grads) {
            if !value.same_shape(grad) {
                return Err(NumError::ShapeMismatch {
                    op: "sgd_step",
                    expected: format!("{}x{}", value.rows(), value.cols()),
                    got: format!("{}x{}", grad.rows(), grad.cols()),
                });
            }
            for (p, g) in value.data_mut().iter_mut().zip(grad.data()) {
                *p -= lr * g;
            }
        }
        Ok(())
    }
}

/// Per-parameter gradient buffers produced by [`Tape::backward`].
///
/// Every registered parameter has a buffer of identical shape;
/// parameters untouched by the forward pass keep all-zero buffers.
#[derive(Debug, Clone)]
pub struct GradientLedger {
    grads: Vec<Matrix>,
}

impl GradientLedger {
    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.grads.iter().enumerate().map(|(i, m)| (ParamId(i), m))
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    /// Constant leaf; no gradient flows out of it.
    Input,
    /// Whole parameter flattened row-major (vector-shaped parameters).
    ParamVec(ParamId),
    /// Single row of a parameter (embedding lookup).
    ParamRow(ParamId, usize),
    /// `M * v` where `M` is a parameter.
    MatVec(ParamId, NodeId),
    Add(NodeId, NodeId),
    Concat(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId),
    /// Inner product; scalar output of length 1.
    Dot(NodeId, NodeId),
    /// `sum_i w[i] * v_i` over equal-length vectors.
    WeightedSum(NodeId, Vec<NodeId>),
    /// `-ln(p[target])`; scalar output.
    NllLoss(NodeId, usize),
    MulConst(NodeId, f64),
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Records a forward pass over a borrowed [`ParamSet`].
///
/// A tape is single-use and single-threaded: build the forward pass,
/// read values, call [`Tape::backward`] once, then drop it. Distinct
/// tapes over the same immutable parameters may run concurrently.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn check_node(&self, id: NodeId) -> Result<(), NumError> {
        if id.0 >= self.nodes.len() {
            return Err(NumError::UnknownNode(id.0));
        }
        Ok(())
    }

    fn check_param(&self, id: ParamId) -> Result<(), NumError> {
        if id.0 >= self.params.len() {
            return Err(NumError::UnknownParam(id.0));
        }
        Ok(())
    }

    /// Value of a recorded node.
    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Scalar value of a length-1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    /// Constant leaf vector.
    pub fn input(&mut self, values: Vec<f64>) -> NodeId {
        self.push(values, Op::Input)
    }

    /// A vector-shaped parameter (`1 x n` or `n x 1`) as a leaf node.
    pub fn param_vector(&mut self, id: ParamId) -> Result<NodeId, NumError> {
        self.check_param(id)?;
        let value = self.params.value(id).data().to_vec();
        Ok(self.push(value, Op::ParamVec(id)))
    }

    /// Row `row` of a parameter matrix as a leaf node.
    pub fn param_row(&mut self, id: ParamId, row: usize) -> Result<NodeId, NumError> {
        self.check_param(id)?;
        let m = self.params.value(id);
        if row >= m.rows() {
            return Err(NumError::IndexOutOfRange {
                index: row,
                len: m.rows(),
            });
        }
        let value = m.row(row).to_vec();
        Ok(self.push(value, Op::ParamRow(id, row)))
    }

    /// `M * v` for a parameter matrix `M`.
    pub fn matvec(&mut self, m: ParamId, v: NodeId) -> Result<NodeId, NumError> {
        self.check_param(m)?;
        self.check_node(v)?;
        let out = self.params.value(m).matvec(self.value(v))?;
        Ok(self.push(out, Op::MatVec(m, v)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        self.check_node(a)?;
        self.check_node(b)?;
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(NumError::ShapeMismatch {
                op: "add",
                expected: format!("length {}", va.len()),
                got: format!("length {}", vb.len()),
            });
        }
        let out = va.iter().zip(vb).map(|(x, y)| x + y).collect();
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        self.check_node(a)?;
        self.check_node(b)?;
        let mut out = self.value(a).to_vec();
        out.extend_from_slice(self.value(b));
        Ok(self.push(out, Op::Concat(a, b)))
    }

    pub fn sigmoid(&mut self, v: NodeId) -> Result<NodeId, NumError> {
        self.check_node(v)?;
        let out = self
            .value(v)
            .iter()
            .map(|x| 1.0 / (1.0 + (-x).exp()))
            .collect();
        Ok(self.push(out, Op::Sigmoid(v)))
    }

    pub fn tanh(&mut self, v: NodeId) -> Result<NodeId, NumError> {
        self.check_node(v)?;
        let out = self.value(v).iter().map(|x| x.tanh()).collect();
        Ok(self.push(out, Op::Tanh(v)))
    }

    /// Shift-normalized softmax: the max entry is subtracted before
    /// exponentiation so large logits cannot overflow.
    pub fn softmax(&mut self, v: NodeId) -> Result<NodeId, NumError> {
        self.check_node(v)?;
        let x = self.value(v);
        let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = x.iter().map(|&e| (e - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let out = exps.iter().map(|e| e / sum).collect();
        Ok(self.push(out, Op::Softmax(v)))
    }

    /// Inner product of two equal-length vectors; length-1 output.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        self.check_node(a)?;
        self.check_node(b)?;
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(NumError::ShapeMismatch {
                op: "dot",
                expected: format!("length {}", va.len()),
                got: format!("length {}", vb.len()),
            });
        }
        let out = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![out], Op::Dot(a, b)))
    }

    /// `sum_i weights[i] * vectors[i]`. The weight vector length must
    /// equal the vector count and all vectors must share one length.
    pub fn weighted_sum(&mut self, weights: NodeId, vectors: &[NodeId]) -> Result<NodeId, NumError> {
        self.check_node(weights)?;
        for &v in vectors {
            self.check_node(v)?;
        }
        let w = self.value(weights);
        if w.len() != vectors.len() {
            return Err(NumError::ShapeMismatch {
                op: "weighted_sum",
                expected: format!("{} weights", vectors.len()),
                got: format!("{}", w.len()),
            });
        }
        let dim = vectors
            .first()
            .map(|&v| self.value(v).len())
            .unwrap_or(0);
        let mut out = vec![0.0; dim];
        for (i, &v) in vectors.iter().enumerate() {
            let vec = self.value(v);
            if vec.len() != dim {
                return Err(NumError::ShapeMismatch {
                    op: "weighted_sum",
                    expected: format!("length {dim}"),
                    got: format!("length {}", vec.len()),
                });
            }
            let wi = self.value(weights)[i];
            for (o, &x) in out.iter_mut().zip(vec) {
                *o += wi * x;
            }
        }
        Ok(self.push(out, Op::WeightedSum(weights, vectors.to_vec())))
    }

    /// Negative log-likelihood `-ln(p[target])` of a probability vector.
    pub fn nll_loss(&mut self, probs: NodeId, target: usize) -> Result<NodeId, NumError> {
        self.check_node(probs)?;
        let p = self.value(probs);
        if target >= p.len() {
            return Err(NumError::IndexOutOfRange {
                index: target,
                len: p.len(),
            });
        }
        let pt = p[target];
        if !(pt > 0.0) {
            return Err(NumError::InvalidProbability {
                index: target,
                value: pt,
            });
        }
        Ok(self.push(vec![-pt.ln()], Op::NllLoss(probs, target)))
    }

    pub fn mul_const(&mut self, v: NodeId, c: f64) -> Result<NodeId, NumError> {
        self.check_node(v)?;
        let out = self.value(v).iter().map(|x| x * c).collect();
        Ok(self.push(out, Op::MulConst(v, c)))
    }

    /// Index of the largest entry; ties break toward the lowest index.
    pub fn argmax(&self, v: NodeId) -> usize {
        let vals = self.value(v);
        let mut best = 0;
        for (i, &x) in vals.iter().enumerate() {
            if x > vals[best] {
                best = i;
            }
        }
        best
    }

    /// Propagates d(loss)/d(parameter) for every parameter reachable
    /// from the scalar node `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<GradientLedger, NumError> {
        self.check_node(loss)?;
        if self.value(loss).len() != 1 {
            return Err(NumError::NonScalarLoss(self.value(loss).len()));
        }

        let mut ledger = self.params.zero_ledger();
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        grads[loss.0][0] = 1.0;

        for idx in (0..=loss.0).rev() {
            if grads[idx].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut grads[idx]);
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::ParamVec(p) => {
                    ledger.get_mut(*p).add_flat(&g)?;
                }
                Op::ParamRow(p, row) => {
                    let target = ledger.get_mut(*p).row_mut(*row);
                    for (o, &v) in target.iter_mut().zip(&g) {
                        *o += v;
                    }
                }
                Op::MatVec(m, v) => {
                    // d(M*v) flows as an outer product into M and a
                    // transposed matvec into v.
                    let input = self.value(*v).to_vec();
                    ledger.get_mut(*m).add_outer(&g, &input)?;
                    let dv = self.params.value(*m).matvec_transposed(&g)?;
                    accumulate(&mut grads[v.0], &dv);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g);
                    accumulate(&mut grads[b.0], &g);
                }
                Op::Concat(a, b) => {
                    let split = self.value(*a).len();
                    accumulate(&mut grads[a.0], &g[..split]);
                    accumulate(&mut grads[b.0], &g[split..]);
                }
                Op::Sigmoid(v) => {
                    let out = &node.value;
                    let dv: Vec<f64> = g
                        .iter()
                        .zip(out)
                        .map(|(gi, yi)| gi * yi * (1.0 - yi))
                        .collect();
                    accumulate(&mut grads[v.0], &dv);
                }
                Op::Tanh(v) => {
                    let out = &node.value;
                    let dv: Vec<f64> = g
                        .iter()
                        .zip(out)
                        .map(|(gi, yi)| gi * (1.0 - yi * yi))
                        .collect();
                    accumulate(&mut grads[v.0], &dv);
                }
                Op::Softmax(v) => {
                    let out = &node.value;
                    let inner: f64 = g.iter().zip(out).map(|(gi, yi)| gi * yi).sum();
                    let dv: Vec<f64> = g
                        .iter()
                        .zip(out)
                        .map(|(gi, yi)| yi * (gi - inner))
                        .collect();
                    accumulate(&mut grads[v.0], &dv);
                }
                Op::Dot(a, b) => {
                    let s = g[0];
                    let va = self.value(*a).to_vec();
                    let vb = self.value(*b).to_vec();
                    for (o, &x) in grads[b.0].iter_mut().zip(&va) {
                        *o += s * x;
                    }
                    for (o, &x) in grads[a.0].iter_mut().zip(&vb) {
                        *o += s * x;
                    }
                }
                Op::WeightedSum(w, vs) => {
                    let weights = self.value(*w).to_vec();
                    for (i, &v) in vs.iter().enumerate() {
                        let vec = self.value(v).to_vec();
                        let dw: f64 = g.iter().zip(&vec).map(|(gi, xi)| gi * xi).sum();
                        grads[w.0][i] += dw;
                        let wi = weights[i];
                        for (o, &gi) in grads[v.0].iter_mut().zip(&g) {
                            *o += wi * gi;
                        }
                    }
                }
                Op::NllLoss(p, target) => {
                    let pt = self.value(*p)[*target];
                    grads[p.0][*target] += -g[0] / pt;
                }
                Op::MulConst(v, c) => {
                    let dv: Vec<f64> = g.iter().map(|gi| gi * c).collect();
                    accumulate(&mut grads[v.0], &dv);
                }
            }
        }
        Ok(ledger)
    }
}

fn accumulate(target: &mut [f64], from: &[f64]) {
    for (o, &v) in target.iter_mut().zip(from) {
        *o += v;
    }
}

/// Compares analytic gradients against central finite differences.
///
/// `build` must construct the loss from scratch on the tape it is
/// given; it is re-run with each coordinate perturbed by `eps` in both
/// directions. Returns the maximum over coordinates of
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn grad_check(
    params: &mut ParamSet,
    build: &mut dyn FnMut(&mut Tape<'_>) -> Result<NodeId, NumError>,
    eps: f64,
) -> Result<f64, NumError> {
    let analytic = {
        let mut tape = Tape::new(params);
        let loss = build(&mut tape)?;
        tape.backward(loss)?
    };

    let eval = |params: &ParamSet,
                build: &mut dyn FnMut(&mut Tape<'_>) -> Result<NodeId, NumError>|
     -> Result<f64, NumError> {
        let mut tape = Tape::new(params);
        let loss = build(&mut tape)?;
        Ok(tape.scalar(loss))
    };

    let mut max_rel: f64 = 0.0;
    for id in params.ids().collect::<Vec<_>>() {
        for i in 0..params.value(id).data().len() {
            let original = params.value(id).data()[i];
            params.value_mut(id).data_mut()[i] = original + eps;
            let plus = eval(params, build)?;
            params.value_mut(id).data_mut()[i] = original - eps;
            let minus = eval(params, build)?;
            params.value_mut(id).data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(id).data()[i];
            let rel = (a - numeric).abs() / (1e-8_f64).max(a.abs() + numeric.abs());
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

//! Static computation graph with reverse-mode differentiation.
//!
//! A [`Graph`] is rebuilt for every minibatch window. Nodes are appended in
//! construction order, which is already a topological order, and values are
//! computed eagerly so forward results can be read before (or without)
//! calling [`Graph::backward`]. Backward walks the node list in reverse and
//! accumulates gradients into the parameters referenced by [`Graph::param`]
//! nodes.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::tensor::{
    self, log_softmax_rows, sigmoid, sigmoid_scalar, softplus, tanh, Tensor,
};

/// Handle into a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named parameter tensors in a fixed order. The order is the serialization
/// and RNG-draw order, so it must not depend on hash-map iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, tensor: Tensor) -> ParamId {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name {name:?}"
        );
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn total_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Per-parameter gradients, aligned with a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            grads: vec![None; params.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Gradient for `id`, materializing zeros when the parameter was unused.
    pub fn get_or_zeros(&self, id: ParamId, params: &ParamSet) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let p = params.get(id);
                Tensor::zeros(p.rows(), p.cols())
            }
        }
    }

    fn accumulate(&mut self, id: ParamId, g: &Tensor) {
        match &mut self.grads[id.0] {
            Some(acc) => {
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += b;
                }
            }
            None => self.grads[id.0] = Some(g.clone()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, Option<&Tensor>)> {
        self.grads
            .iter()
            .enumerate()
            .map(|(i, g)| (ParamId(i), g.as_ref()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Option<Tensor>> {
        self.grads.iter_mut()
    }

    /// Global L2 norm over every gradient value.
    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(Tensor::sq_norm)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.iter_mut().flatten() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(Tensor::is_finite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Add(NodeId, NodeId),
    /// matrix (m x n) + row vector (1 x n) broadcast over rows
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    MatMul(NodeId, NodeId),
    /// a (m x n) * b^T with b (p x n)
    MatMulNT(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    LogSoftmaxRows(NodeId),
    /// scalar: -sum_r x[r, targets[r]]
    PickNegSum(NodeId, Vec<usize>),
    /// out[r] = x[ids[r]]
    GatherRows(NodeId, Vec<usize>),
    /// out[r] = sum_{i in lists[r]} x[i]
    GatherSumRows(NodeId, Vec<Vec<usize>>),
    /// elementwise KL( Bernoulli(sigmoid(a)) || Bernoulli(sigmoid(b)) )
    BernoulliKl(NodeId, NodeId),
    SumAll(NodeId),
    AddScalars(Vec<NodeId>),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Computation graph over a borrowed [`ParamSet`].
pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_nodes: HashMap<usize, NodeId>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    /// Leaf node for a parameter; memoized so every use of the parameter in
    /// one graph shares a single node and gradients accumulate there.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id.0) {
            return n;
        }
        let value = self.params.get(id).clone();
        let n = self.push(Op::Param(id), value);
        self.param_nodes.insert(id.0, n);
        n
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (m, n) = (self.value(a).rows(), self.value(a).cols());
        let r = self.value(row);
        if r.rows() != 1 || r.cols() != n {
            return Err(Error::Shape(format!(
                "add_row {}x{} + {}x{}",
                m,
                n,
                r.rows(),
                r.cols()
            )));
        }
        let mut v = self.value(a).clone();
        for i in 0..m {
            for (x, &b) in v.row_mut(i).iter_mut().zip(self.value(row).data()) {
                *x += b;
            }
        }
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::sub(self.value(a), self.value(b))?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::mul(self.value(a), self.value(b))?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x * c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul_nt(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMulNT(a, b), v))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = sigmoid(self.value(a));
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = tanh(self.value(a));
        self.push(Op::Tanh(a), v)
    }

    pub fn log_softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = log_softmax_rows(self.value(a));
        self.push(Op::LogSoftmaxRows(a), v)
    }

    /// Negative sum of per-row picked entries; the cross-entropy head.
    pub fn pick_neg_sum(&mut self, a: NodeId, targets: Vec<usize>) -> Result<NodeId> {
        let x = self.value(a);
        if targets.len() != x.rows() {
            return Err(Error::Shape(format!(
                "pick_neg_sum: {} targets for {} rows",
                targets.len(),
                x.rows()
            )));
        }
        let mut s = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= x.cols() {
                return Err(Error::Shape(format!(
                    "pick_neg_sum: target {} out of {} columns",
                    t,
                    x.cols()
                )));
            }
            s += x.at(r, t);
        }
        Ok(self.push(Op::PickNegSum(a, targets), Tensor::scalar(-s)))
    }

    pub fn gather_rows(&mut self, a: NodeId, ids: Vec<usize>) -> Result<NodeId> {
        let x = self.value(a);
        let mut v = Tensor::zeros(ids.len(), x.cols());
        for (r, &i) in ids.iter().enumerate() {
            if i >= x.rows() {
                return Err(Error::Shape(format!(
                    "gather_rows: row {} out of {}",
                    i,
                    x.rows()
                )));
            }
            v.row_mut(r).copy_from_slice(x.row(i));
        }
        Ok(self.push(Op::GatherRows(a, ids), v))
    }

    pub fn gather_sum_rows(&mut self, a: NodeId, lists: Vec<Vec<usize>>) -> Result<NodeId> {
        let x = self.value(a);
        let mut v = Tensor::zeros(lists.len(), x.cols());
        for (r, list) in lists.iter().enumerate() {
            for &i in list {
                if i >= x.rows() {
                    return Err(Error::Shape(format!(
                        "gather_sum_rows: row {} out of {}",
                        i,
                        x.rows()
                    )));
                }
                for (o, &src) in v.row_mut(r).iter_mut().zip(x.row(i)) {
                    *o += src;
                }
            }
        }
        Ok(self.push(Op::GatherSumRows(a, lists), v))
    }

    /// Elementwise KL between Bernoullis given by logits: with g = sigmoid(a)
    /// and p = sigmoid(b),
    ///   kl = g*(ln g - ln p) + (1-g)*(ln(1-g) - ln(1-p))
    /// computed through softplus so saturated logits stay finite.
    pub fn bernoulli_kl(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip(self.value(b), bernoulli_kl_scalar)?;
        Ok(self.push(Op::BernoulliKl(a, b), v))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), v)
    }

    pub fn add_scalars(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        let mut s = 0.0;
        for &p in &parts {
            let v = self.value(p);
            if v.len() != 1 {
                return Err(Error::Shape("add_scalars on non-scalar node".into()));
            }
            s += v.item();
        }
        Ok(self.push(Op::AddScalars(parts), Tensor::scalar(s)))
    }

    /// Reverse-mode gradients of a scalar `loss` with respect to every
    /// parameter referenced by the graph.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape("backward: loss is not a scalar".into()));
        }
        let mut node_grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        node_grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::zeros_like(self.params);

        for idx in (0..=loss.0).rev() {
            let g = match node_grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(pid) => out.accumulate(*pid, &g),
                Op::Add(a, b) => {
                    acc(&mut node_grads, *a, &g);
                    acc(&mut node_grads, *b, &g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut node_grads, *a, &g);
                    let mut rg = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in rg.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut node_grads, *row, &rg);
                }
                Op::Sub(a, b) => {
                    acc(&mut node_grads, *a, &g);
                    acc(&mut node_grads, *b, &g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    let ga = tensor::mul(&g, self.value(*b))?;
                    let gb = tensor::mul(&g, self.value(*a))?;
                    acc(&mut node_grads, *a, &ga);
                    acc(&mut node_grads, *b, &gb);
                }
                Op::Scale(a, c) => acc(&mut node_grads, *a, &g.map(|v| v * c)),
                Op::MatMul(a, b) => {
                    let ga = tensor::matmul_nt(&g, self.value(*b))?;
                    let gb = tensor::matmul_tn(self.value(*a), &g)?;
                    acc(&mut node_grads, *a, &ga);
                    acc(&mut node_grads, *b, &gb);
                }
                Op::MatMulNT(a, b) => {
                    let ga = tensor::matmul(&g, self.value(*b))?;
                    let gb = tensor::matmul_tn(&g, self.value(*a))?;
                    acc(&mut node_grads, *a, &ga);
                    acc(&mut node_grads, *b, &gb);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = g.zip(y, |gv, yv| gv * yv * (1.0 - yv))?;
                    acc(&mut node_grads, *a, &ga);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = g.zip(y, |gv, yv| gv * (1.0 - yv * yv))?;
                    acc(&mut node_grads, *a, &ga);
                }
                Op::LogSoftmaxRows(a) => {
                    // d/dx = g - softmax(x) * rowsum(g)
                    let y = &node.value;
                    let mut ga = g.clone();
                    for r in 0..ga.rows() {
                        let row_sum: f64 = g.row(r).iter().sum();
                        for (o, &lp) in ga.row_mut(r).iter_mut().zip(y.row(r)) {
                            *o -= lp.exp() * row_sum;
                        }
                    }
                    acc(&mut node_grads, *a, &ga);
                }
                Op::PickNegSum(a, targets) => {
                    let gv = g.item();
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for (r, &t) in targets.iter().enumerate() {
                        ga.set(r, t, -gv);
                    }
                    acc(&mut node_grads, *a, &ga);
                }
                Op::GatherRows(a, ids) => {
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for (r, &i) in ids.iter().enumerate() {
                        for (o, &v) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut node_grads, *a, &ga);
                }
                Op::GatherSumRows(a, lists) => {
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for (r, list) in lists.iter().enumerate() {
                        for &i in list {
                            for (o, &v) in ga.row_mut(i).iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                    }
                    acc(&mut node_grads, *a, &ga);
                }
                Op::BernoulliKl(a, b) => {
                    // dKL/da = g(1-g)(a-b), dKL/db = p - g  (g, p are the sigmoids)
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let ga = {
                        let mut t = g.clone();
                        for ((o, &x), &s) in t.data_mut().iter_mut().zip(av.data()).zip(bv.data()) {
                            let gamma = sigmoid_scalar(x);
                            *o *= gamma * (1.0 - gamma) * (x - s);
                        }
                        t
                    };
                    let gb = {
                        let mut t = g.clone();
                        for ((o, &x), &s) in t.data_mut().iter_mut().zip(av.data()).zip(bv.data()) {
                            *o *= sigmoid_scalar(s) - sigmoid_scalar(x);
                        }
                        t
                    };
                    acc(&mut node_grads, *a, &ga);
                    acc(&mut node_grads, *b, &gb);
                }
                Op::SumAll(a) => {
                    let gv = g.item();
                    let x = self.value(*a);
                    let ga = Tensor::from_vec(x.rows(), x.cols(), vec![gv; x.len()]);
                    acc(&mut node_grads, *a, &ga);
                }
                Op::AddScalars(parts) => {
                    for &p in parts {
                        acc(&mut node_grads, p, &g);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn acc(node_grads: &mut [Option<Tensor>], id: NodeId, g: &Tensor) {
    match &mut node_grads[id.0] {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => node_grads[id.0] = Some(g.clone()),
    }
}

/// KL( Bernoulli(sigmoid(a)) || Bernoulli(sigmoid(b)) ), stable for any
/// finite logits.
pub fn bernoulli_kl_scalar(a: f64, b: f64) -> f64 {
    let gamma = sigmoid_scalar(a);
    // ln sigmoid(x) = -softplus(-x); ln(1 - sigmoid(x)) = -softplus(x)
    gamma * (softplus(-b) - softplus(-a)) + (1.0 - gamma) * (softplus(b) - softplus(a))
}

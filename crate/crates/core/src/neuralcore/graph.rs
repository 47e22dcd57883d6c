use super::tensor::{ParamId, ParameterStore};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Param(ParamId),
    Input,
    Row(ParamId, usize),
    MatVec(ParamId, NodeId),
    Affine(ParamId, NodeId, ParamId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    OneMinus(NodeId),
    Concat(Vec<NodeId>),
    Dot(NodeId, NodeId),
    Stack(Vec<NodeId>),
    Softmax(NodeId),
    WeightedSum(NodeId, Vec<NodeId>),
    CrossEntropy(NodeId, usize),
    Sum(Vec<NodeId>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Per-parameter gradients produced by [`Graph::backward`]; `None` for
/// parameters the loss does not reach.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.grads.get(id.index())?.as_deref()
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<&Vec<f64>>> {
        self.grads.iter().map(Option::as_ref)
    }
}

/// Tape of operations over vectors. Parameters are read from the borrowed
/// store; matrices only enter through `matvec`/`affine`.
pub struct Graph<'a> {
    store: &'a ParameterStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParameterStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'a ParameterStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        match self.nodes[id.0].op {
            Op::Param(p) => &self.store.get(p).data,
            _ => &self.nodes[id.0].value,
        }
    }

    pub fn dim(&self, id: NodeId) -> usize {
        self.value(id).len()
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id)[0]
    }

    fn expect_dim(&self, id: NodeId, n: usize, what: &'static str) -> Result<(), NnError> {
        let got = self.dim(id);
        if got != n {
            return Err(NnError::ShapeMismatch {
                what,
                expected: n,
                got,
            });
        }
        Ok(())
    }

    /// Node for a parameter, flattened; memoized per graph.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        let n = self.push(Op::Param(id), Vec::new());
        self.param_nodes[id.0] = Some(n);
        n
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, n: usize) -> NodeId {
        self.input(vec![0.0; n])
    }

    /// Row `index` of a rank-2 parameter (embedding lookup).
    pub fn row(&mut self, table: ParamId, index: usize) -> Result<NodeId, NnError> {
        let t = self.store.get(table);
        let (rows, cols) = (t.rows(), t.cols());
        if index >= rows {
            return Err(NnError::IndexOutOfRange { index, len: rows });
        }
        let v = t.data[index * cols..(index + 1) * cols].to_vec();
        Ok(self.push(Op::Row(table, index), v))
    }

    fn matvec_value(&self, w: ParamId, x: NodeId) -> Result<Vec<f64>, NnError> {
        let t = self.store.get(w);
        let (r, c) = (t.rows(), t.cols());
        self.expect_dim(x, c, "matvec input")?;
        let xv = self.value(x);
        Ok((0..r)
            .map(|i| {
                t.data[i * c..(i + 1) * c]
                    .iter()
                    .zip(xv)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn matvec(&mut self, w: ParamId, x: NodeId) -> Result<NodeId, NnError> {
        let v = self.matvec_value(w, x)?;
        Ok(self.push(Op::MatVec(w, x), v))
    }

    /// `W x + b`.
    pub fn affine(&mut self, w: ParamId, x: NodeId, b: ParamId) -> Result<NodeId, NnError> {
        let mut v = self.matvec_value(w, x)?;
        let bias = &self.store.get(b).data;
        if bias.len() != v.len() {
            return Err(NnError::ShapeMismatch {
                what: "affine bias",
                expected: v.len(),
                got: bias.len(),
            });
        }
        v.iter_mut().zip(bias).for_each(|(a, b)| *a += b);
        Ok(self.push(Op::Affine(w, x, b), v))
    }

    fn binary(
        &mut self,
        a: NodeId,
        b: NodeId,
        what: &'static str,
        f: fn(f64, f64) -> f64,
    ) -> Result<Vec<f64>, NnError> {
        self.expect_dim(b, self.dim(a), what)?;
        Ok(self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let v = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let v = self.binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).iter().map(|x| x * c).collect();
        self.push(Op::Scale(a, c), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).iter().map(|x| sigmoid(*x)).collect();
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(Op::Tanh(a), v)
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).iter().map(|x| 1.0 - x).collect();
        self.push(Op::OneMinus(a), v)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::with_capacity(parts.iter().map(|p| self.dim(*p)).sum());
        for p in parts {
            v.extend_from_slice(self.value(*p));
        }
        self.push(Op::Concat(parts.to_vec()), v)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.expect_dim(b, self.dim(a), "dot")?;
        let s = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Op::Dot(a, b), vec![s]))
    }

    /// Scalars into one vector.
    pub fn stack(&mut self, scalars: &[NodeId]) -> Result<NodeId, NnError> {
        let mut v = Vec::with_capacity(scalars.len());
        for s in scalars {
            self.expect_dim(*s, 1, "stack element")?;
            v.push(self.scalar(*s));
        }
        Ok(self.push(Op::Stack(scalars.to_vec()), v))
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = softmax(self.value(a));
        self.push(Op::Softmax(a), v)
    }

    /// `Σ weights[i] · items[i]`.
    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> Result<NodeId, NnError> {
        if items.is_empty() {
            return Err(NnError::EmptySequence);
        }
        self.expect_dim(weights, items.len(), "weighted sum weights")?;
        let d = self.dim(items[0]);
        let mut v = vec![0.0; d];
        for (w, it) in self.value(weights).iter().zip(items) {
            self.expect_dim(*it, d, "weighted sum item")?;
            v.iter_mut()
                .zip(self.value(*it))
                .for_each(|(a, b)| *a += w * b);
        }
        Ok(self.push(Op::WeightedSum(weights, items.to_vec()), v))
    }

    /// `-log softmax(logits)[target]`, stabilized by max subtraction.
    pub fn cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId, NnError> {
        let l = self.value(logits);
        if target >= l.len() {
            return Err(NnError::IndexOutOfRange {
                index: target,
                len: l.len(),
            });
        }
        let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + l.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        let loss = lse - l[target];
        Ok(self.push(Op::CrossEntropy(logits, target), vec![loss]))
    }

    pub fn sum(&mut self, scalars: &[NodeId]) -> Result<NodeId, NnError> {
        let mut s = 0.0;
        for n in scalars {
            self.expect_dim(*n, 1, "sum element")?;
            s += self.scalar(*n);
        }
        Ok(self.push(Op::Sum(scalars.to_vec()), vec![s]))
    }

    /// Reverse-mode pass from a scalar root.
    pub fn backward(&self, root: NodeId) -> Result<Gradients, NnError> {
        if self.dim(root) != 1 {
            return Err(NnError::ShapeMismatch {
                what: "loss root",
                expected: 1,
                got: self.dim(root),
            });
        }
        if !self.scalar(root).is_finite() {
            return Err(NnError::NonFinite);
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        let mut out = Gradients {
            grads: vec![None; self.store.len()],
        };

        fn acc(slot: &mut Option<Vec<f64>>, n: usize) -> &mut Vec<f64> {
            slot.get_or_insert_with(|| vec![0.0; n])
        }

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    let slot = acc(&mut out.grads[p.index()], g.len());
                    slot.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Op::Row(p, idx) => {
                    let t = self.store.get(*p);
                    let cols = t.cols();
                    let slot = acc(&mut out.grads[p.index()], t.len());
                    slot[idx * cols..(idx + 1) * cols]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(a, b)| *a += b);
                }
                Op::MatVec(w, x) | Op::Affine(w, x, _) => {
                    let t = self.store.get(*w);
                    let c = t.cols();
                    let xv = self.value(*x);
                    {
                        let gw = acc(&mut out.grads[w.index()], t.len());
                        for (r, gr) in g.iter().enumerate() {
                            if *gr != 0.0 {
                                gw[r * c..(r + 1) * c]
                                    .iter_mut()
                                    .zip(xv)
                                    .for_each(|(a, b)| *a += gr * b);
                            }
                        }
                    }
                    let gx = acc(&mut grads[x.0], c);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            gx.iter_mut()
                                .zip(&t.data[r * c..(r + 1) * c])
                                .for_each(|(a, b)| *a += gr * b);
                        }
                    }
                    if let Op::Affine(_, _, b) = &node.op {
                        let gb = acc(&mut out.grads[b.index()], g.len());
                        gb.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                    }
                }
                Op::Add(a, b) => {
                    for n in [a, b] {
                        let s = acc(&mut grads[n.0], g.len());
                        s.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(x, y)| x * y).collect();
                    add_into(acc(&mut grads[a.0], g.len()), &ga);
                    add_into(acc(&mut grads[b.0], g.len()), &gb);
                }
                Op::Scale(a, c) => {
                    let s = acc(&mut grads[a.0], g.len());
                    s.iter_mut().zip(&g).for_each(|(x, y)| *x += c * y);
                }
                Op::Sigmoid(a) => {
                    let s = acc(&mut grads[a.0], g.len());
                    for ((x, gy), yv) in s.iter_mut().zip(&g).zip(y) {
                        *x += gy * yv * (1.0 - yv);
                    }
                }
                Op::Tanh(a) => {
                    let s = acc(&mut grads[a.0], g.len());
                    for ((x, gy), yv) in s.iter_mut().zip(&g).zip(y) {
                        *x += gy * (1.0 - yv * yv);
                    }
                }
                Op::OneMinus(a) => {
                    let s = acc(&mut grads[a.0], g.len());
                    s.iter_mut().zip(&g).for_each(|(x, y)| *x -= y);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let d = self.dim(*p);
                        add_into(acc(&mut grads[p.0], d), &g[off..off + d]);
                        off += d;
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga: Vec<f64> = bv.iter().map(|v| g[0] * v).collect();
                    let gb: Vec<f64> = av.iter().map(|v| g[0] * v).collect();
                    add_into(acc(&mut grads[a.0], ga.len()), &ga);
                    add_into(acc(&mut grads[b.0], gb.len()), &gb);
                }
                Op::Stack(parts) => {
                    for (p, gv) in parts.iter().zip(&g) {
                        acc(&mut grads[p.0], 1)[0] += gv;
                    }
                }
                Op::Softmax(a) => {
                    let dot: f64 = g.iter().zip(y).map(|(x, y)| x * y).sum();
                    let s = acc(&mut grads[a.0], g.len());
                    for ((x, gy), yv) in s.iter_mut().zip(&g).zip(y) {
                        *x += yv * (gy - dot);
                    }
                }
                Op::WeightedSum(w, items) => {
                    let wv = self.value(*w);
                    let gw: Vec<f64> = items
                        .iter()
                        .map(|it| self.value(*it).iter().zip(&g).map(|(a, b)| a * b).sum())
                        .collect();
                    for (it, wi) in items.iter().zip(wv) {
                        let s = acc(&mut grads[it.0], g.len());
                        s.iter_mut().zip(&g).for_each(|(x, y)| *x += wi * y);
                    }
                    add_into(acc(&mut grads[w.0], gw.len()), &gw);
                }
                Op::CrossEntropy(logits, target) => {
                    let mut p = softmax(self.value(*logits));
                    p[*target] -= 1.0;
                    p.iter_mut().for_each(|v| *v *= g[0]);
                    add_into(acc(&mut grads[logits.0], p.len()), &p);
                }
                Op::Sum(parts) => {
                    for p in parts {
                        acc(&mut grads[p.0], 1)[0] += g[0];
                    }
                }
            }
        }
        Ok(out)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

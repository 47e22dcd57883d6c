use rand::Rng;

use super::graph::{Graph, NodeId};
use super::tensor::{ParamId, ParameterStore, Tensor};
use super::NnError;

fn matrix<R: Rng>(
    store: &mut ParameterStore,
    name: String,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<ParamId, NnError> {
    store.add(&name, Tensor::glorot(&[rows, cols], rng))
}

fn bias(store: &mut ParameterStore, name: String, n: usize) -> Result<ParamId, NnError> {
    store.add(&name, Tensor::zeros(&[n]))
}

/// GRU cell: update gate `z`, reset gate `r`, candidate `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub wz: ParamId,
    pub uz: ParamId,
    pub bz: ParamId,
    pub wr: ParamId,
    pub ur: ParamId,
    pub br: ParamId,
    pub wn: ParamId,
    pub un: ParamId,
    pub bn: ParamId,
}

impl GruCell {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let (i, h) = (input_dim, hidden_dim);
        Ok(Self {
            input_dim,
            hidden_dim,
            wz: matrix(store, format!("{prefix}.wz"), h, i, rng)?,
            uz: matrix(store, format!("{prefix}.uz"), h, h, rng)?,
            bz: bias(store, format!("{prefix}.bz"), h)?,
            wr: matrix(store, format!("{prefix}.wr"), h, i, rng)?,
            ur: matrix(store, format!("{prefix}.ur"), h, h, rng)?,
            br: bias(store, format!("{prefix}.br"), h)?,
            wn: matrix(store, format!("{prefix}.wn"), h, i, rng)?,
            un: matrix(store, format!("{prefix}.un"), h, h, rng)?,
            bn: bias(store, format!("{prefix}.bn"), h)?,
        })
    }

    pub fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
        3 * (hidden_dim * input_dim + hidden_dim * hidden_dim + hidden_dim)
    }
}

/// `z = σ(Wz x + Uz h + bz)`, `r = σ(Wr x + Ur h + br)`,
/// `n = tanh(Wn x + Un (r ⊙ h) + bn)`, `h' = (1 - z) ⊙ n + z ⊙ h`.
pub fn gru_step(
    g: &mut Graph,
    cell: &GruCell,
    h_prev: NodeId,
    x: NodeId,
) -> Result<NodeId, NnError> {
    for (node, n, what) in [
        (h_prev, cell.hidden_dim, "gru hidden state"),
        (x, cell.input_dim, "gru input"),
    ] {
        if g.dim(node) != n {
            return Err(NnError::ShapeMismatch {
                what,
                expected: n,
                got: g.dim(node),
            });
        }
    }
    let zx = g.affine(cell.wz, x, cell.bz)?;
    let zh = g.matvec(cell.uz, h_prev)?;
    let z = g.add(zx, zh)?;
    let z = g.sigmoid(z);
    let rx = g.affine(cell.wr, x, cell.br)?;
    let rh = g.matvec(cell.ur, h_prev)?;
    let r = g.add(rx, rh)?;
    let r = g.sigmoid(r);
    let rh = g.mul(r, h_prev)?;
    let nx = g.affine(cell.wn, x, cell.bn)?;
    let nh = g.matvec(cell.un, rh)?;
    let n = g.add(nx, nh)?;
    let n = g.tanh(n);
    let keep = g.one_minus(z);
    let a = g.mul(keep, n)?;
    let b = g.mul(z, h_prev)?;
    g.add(a, b)
}

/// Run a cell over `xs` from a zero state; returns every state.
pub fn rnn_encode(g: &mut Graph, cell: &GruCell, xs: &[NodeId]) -> Result<Vec<NodeId>, NnError> {
    let mut h = g.zeros(cell.hidden_dim);
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        h = gru_step(g, cell, h, *x)?;
        out.push(h);
    }
    Ok(out)
}

/// Forward and backward state sequences, both indexed by input position.
pub fn birnn_states(
    g: &mut Graph,
    fwd: &GruCell,
    bwd: &GruCell,
    xs: &[NodeId],
) -> Result<(Vec<NodeId>, Vec<NodeId>), NnError> {
    if xs.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let f = rnn_encode(g, fwd, xs)?;
    let rev: Vec<NodeId> = xs.iter().rev().copied().collect();
    let mut b = rnn_encode(g, bwd, &rev)?;
    b.reverse();
    Ok((f, b))
}

/// `h_i = [→h_i; ←h_i]`.
pub fn birnn_encode(
    g: &mut Graph,
    fwd: &GruCell,
    bwd: &GruCell,
    xs: &[NodeId],
) -> Result<Vec<NodeId>, NnError> {
    let (f, b) = birnn_states(g, fwd, bwd, xs)?;
    Ok(f.into_iter()
        .zip(b)
        .map(|(a, b)| g.concat(&[a, b]))
        .collect())
}

/// `W x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub input_dim: usize,
    pub output_dim: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        prefix: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(Self {
            input_dim,
            output_dim,
            w: matrix(store, format!("{prefix}.w"), output_dim, input_dim, rng)?,
            b: bias(store, format!("{prefix}.b"), output_dim)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId, NnError> {
        g.affine(self.w, x, self.b)
    }

    pub fn param_count(input_dim: usize, output_dim: usize) -> usize {
        output_dim * (input_dim + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Embedding {
    pub vocab: usize,
    pub dim: usize,
    pub table: ParamId,
}

impl Embedding {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        vocab: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(Self {
            vocab,
            dim,
            table: store.add(name, Tensor::glorot(&[vocab, dim], rng))?,
        })
    }

    pub fn lookup(&self, g: &mut Graph, index: usize) -> Result<NodeId, NnError> {
        g.row(self.table, index)
    }
}

/// Additive attention: `score_j = v · tanh(Wq q + Wk k_j + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdditiveAttention {
    pub query_dim: usize,
    pub key_dim: usize,
    pub attention_dim: usize,
    pub wq: ParamId,
    pub wk: ParamId,
    pub b: ParamId,
    pub v: ParamId,
}

impl AdditiveAttention {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        prefix: &str,
        query_dim: usize,
        key_dim: usize,
        attention_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(Self {
            query_dim,
            key_dim,
            attention_dim,
            wq: matrix(store, format!("{prefix}.wq"), attention_dim, query_dim, rng)?,
            wk: matrix(store, format!("{prefix}.wk"), attention_dim, key_dim, rng)?,
            b: bias(store, format!("{prefix}.b"), attention_dim)?,
            v: store.add(
                &format!("{prefix}.v"),
                Tensor::glorot(&[attention_dim], rng),
            )?,
        })
    }

    pub fn param_count(query_dim: usize, key_dim: usize, attention_dim: usize) -> usize {
        attention_dim * (query_dim + key_dim + 2)
    }

    /// `Wk k_j + b` for each key; reusable across decoder steps.
    pub fn project_keys(&self, g: &mut Graph, keys: &[NodeId]) -> Result<Vec<NodeId>, NnError> {
        keys.iter().map(|k| g.affine(self.wk, *k, self.b)).collect()
    }

    /// Attend with keys already passed through [`Self::project_keys`].
    pub fn attend_projected(
        &self,
        g: &mut Graph,
        query: NodeId,
        projected: &[NodeId],
        values: &[NodeId],
    ) -> Result<(NodeId, NodeId), NnError> {
        if projected.is_empty() {
            return Err(NnError::EmptySequence);
        }
        if projected.len() != values.len() {
            return Err(NnError::ShapeMismatch {
                what: "attention values",
                expected: projected.len(),
                got: values.len(),
            });
        }
        let q = g.matvec(self.wq, query)?;
        let v = g.param(self.v);
        let mut scores = Vec::with_capacity(projected.len());
        for k in projected {
            let s = g.add(q, *k)?;
            let s = g.tanh(s);
            scores.push(g.dot(v, s)?);
        }
        let scores = g.stack(&scores)?;
        let weights = g.softmax(scores);
        let context = g.weighted_sum(weights, values)?;
        Ok((context, weights))
    }
}

/// Returns `(context, weights)`.
pub fn additive_attention(
    g: &mut Graph,
    att: &AdditiveAttention,
    query: NodeId,
    keys: &[NodeId],
    values: &[NodeId],
) -> Result<(NodeId, NodeId), NnError> {
    if keys.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let projected = att.project_keys(g, keys)?;
    att.attend_projected(g, query, &projected, values)
}

pub fn cross_entropy(g: &mut Graph, logits: NodeId, target: usize) -> Result<NodeId, NnError> {
    g.cross_entropy(logits, target)
}

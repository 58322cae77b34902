//! Reverse-mode automatic differentiation over dense row-major f64 matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters live
//! in a [`ParamStore`] and are copied (or gathered) onto the tape; calling
//! [`Tape::backward`] accumulates their gradients back into the store.

use crate::params::{ParamId, ParamStore};

pub type Var = usize;

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param(ParamId),
    GatherParam(ParamId, Vec<usize>),
    Gather(Var, Vec<usize>),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    AddScalar(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Gelu(Var),
    SoftmaxRows(Var),
    LayerNorm(Var, Vec<f64>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Reshape(Var),
    Transpose(Var),
    Pick(Var, Vec<(usize, usize)>),
    Sum(Var),
    SoftmaxCe {
        logits: Var,
        targets: Vec<usize>,
        gamma: f64,
        probs: Vec<f64>,
    },
    Bce {
        logits: Var,
        targets: Vec<bool>,
        weights: Option<Vec<f64>>,
        gamma: f64,
    },
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    needs_grad: bool,
    op: Op,
}

pub struct Tape {
    nodes: Vec<Node>,
    first_non_finite: Option<Var>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// log sigmoid(x).
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Focal negative log-likelihood `-(1 - p)^gamma log p` from `log p`.
pub fn focal_nll(lp: f64, gamma: f64) -> f64 {
    focal_softmax_coef(lp.exp(), lp, gamma).0
}

/// Focal binary cross-entropy of logit `z` against a positive target
/// (negate `z` for a negative one).
pub fn focal_bce(z: f64, gamma: f64) -> f64 {
    let lp = log_sigmoid(z);
    if gamma == 0.0 {
        -lp
    } else {
        -(1.0 - sigmoid(z)).powf(gamma) * lp
    }
}

/// Row-wise log-softmax of a `rows x cols` matrix.
pub fn log_softmax_rows(values: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for (row, o) in values.chunks(cols).zip(out.chunks_mut(cols)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        for (oi, &x) in o.iter_mut().zip(row) {
            *oi = x - lse;
        }
    }
    out
}

fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let o = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            for (oj, &bj) in o.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                *oj += x * bj;
            }
        }
    }
    out
}

/// a (n x k) times b^T where b is m x k.
fn matmul_t(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let ai = &a[i * k..(i + 1) * k];
        for j in 0..m {
            out[i * m + j] = ai
                .iter()
                .zip(&b[j * k..(j + 1) * k])
                .map(|(x, y)| x * y)
                .sum();
        }
    }
    out
}

/// a^T g, where a is n x k and g is n x m.
fn t_matmul(a: &[f64], g: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * m];
    for i in 0..n {
        let gi = &g[i * m..(i + 1) * m];
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            for (oj, &gj) in out[p * m..(p + 1) * m].iter_mut().zip(gi) {
                *oj += x * gj;
            }
        }
    }
    out
}

fn transpose(v: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = v[r * cols + c];
        }
    }
    out
}

fn acc(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Focal cross-entropy -(1-p)^g log p for the target probability `p_t`
/// (with `lp = log p_t`), and the factor `coef` such that the gradient with
/// respect to logit j is `coef * (delta_tj - p_j)`.
fn focal_softmax_coef(p_t: f64, lp: f64, gamma: f64) -> (f64, f64) {
    if gamma == 0.0 {
        return (-lp, -1.0);
    }
    let q = 1.0 - p_t;
    let loss = -q.powf(gamma) * lp;
    let coef = gamma * q.powf(gamma - 1.0) * p_t * lp - q.powf(gamma);
    (loss, coef)
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            first_non_finite: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the first node whose value was NaN or infinite, if any.
    pub fn first_non_finite(&self) -> Option<Var> {
        self.first_non_finite
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, needs_grad: bool, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        let id = self.nodes.len();
        if self.first_non_finite.is_none() && value.iter().any(|v| !v.is_finite()) {
            self.first_non_finite = Some(id);
        }
        self.nodes.push(Node {
            rows,
            cols,
            value,
            needs_grad,
            op,
        });
        id
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v].needs_grad
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        (self.nodes[v].rows, self.nodes[v].cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        assert_eq!(self.nodes[v].value.len(), 1);
        self.nodes[v].value[0]
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(rows * cols, value.len());
        self.push(rows, cols, value, false, Op::Const)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let p = store.get(id);
        self.push(p.rows, p.cols, p.value.clone(), !p.frozen, Op::Param(id))
    }

    /// Rows `indices` of a parameter matrix, without copying the whole table.
    pub fn gather_param(&mut self, store: &ParamStore, id: ParamId, indices: &[usize]) -> Var {
        let p = store.get(id);
        let mut value = Vec::with_capacity(indices.len() * p.cols);
        for &i in indices {
            value.extend_from_slice(&p.value[i * p.cols..(i + 1) * p.cols]);
        }
        self.push(
            indices.len(),
            p.cols,
            value,
            !p.frozen,
            Op::GatherParam(id, indices.to_vec()),
        )
    }

    pub fn gather(&mut self, a: Var, indices: &[usize]) -> Var {
        let (rows, cols) = self.shape(a);
        let src = &self.nodes[a].value;
        let mut value = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            assert!(i < rows, "gather index {i} out of {rows} rows");
            value.extend_from_slice(&src[i * cols..(i + 1) * cols]);
        }
        let ng = self.ng(a);
        self.push(
            indices.len(),
            cols,
            value,
            ng,
            Op::Gather(a, indices.to_vec()),
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (n, k) = self.shape(a);
        let (k2, m) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimensions");
        let value = matmul(&self.nodes[a].value, &self.nodes[b].value, n, k, m);
        let ng = self.ng(a) || self.ng(b);
        self.push(n, m, value, ng, Op::MatMul(a, b))
    }

    /// a * b^T.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (n, k) = self.shape(a);
        let (m, k2) = self.shape(b);
        assert_eq!(k, k2, "matmul_t inner dimensions");
        let value = matmul_t(&self.nodes[a].value, &self.nodes[b].value, n, k, m);
        let ng = self.ng(a) || self.ng(b);
        self.push(n, m, value, ng, Op::MatMulT(a, b))
    }

    fn zip_op(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "elementwise shapes");
        let value = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let (r, c) = self.shape(a);
        let ng = self.ng(a) || self.ng(b);
        self.push(r, c, value, ng, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_op(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_op(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_op(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn row_op(&mut self, a: Var, row: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(row), (1, c), "row broadcast shape");
        let rv = &self.nodes[row].value;
        let value = self.nodes[a]
            .value
            .chunks(c)
            .flat_map(|x| x.iter().zip(rv).map(|(&x, &y)| f(x, y)))
            .collect();
        let ng = self.ng(a) || self.ng(row);
        self.push(r, c, value, ng, op)
    }

    /// Adds a 1 x cols row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        self.row_op(a, row, |x, y| x + y, Op::AddRow(a, row))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        self.row_op(a, row, |x, y| x * y, Op::MulRow(a, row))
    }

    /// Adds a 1 x 1 value to every entry of `a`.
    pub fn add_scalar(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.shape(s), (1, 1));
        let sv = self.nodes[s].value[0];
        let value = self.nodes[a].value.iter().map(|x| x + sv).collect();
        let (r, c) = self.shape(a);
        let ng = self.ng(a) || self.ng(s);
        self.push(r, c, value, ng, Op::AddScalar(a, s))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.nodes[a].value.iter().map(|x| x * k).collect();
        let (r, c) = self.shape(a);
        let ng = self.ng(a);
        self.push(r, c, value, ng, Op::Scale(a, k))
    }

    fn map_op(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.nodes[a].value.iter().map(|&x| f(x)).collect();
        let (r, c) = self.shape(a);
        let ng = self.ng(a);
        self.push(r, c, value, ng, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map_op(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map_op(a, f64::tanh, Op::Tanh(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        self.map_op(a, gelu, Op::Gelu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let value = log_softmax_rows(&self.nodes[a].value, c)
            .into_iter()
            .map(f64::exp)
            .collect();
        let ng = self.ng(a);
        self.push(r, c, value, ng, Op::SoftmaxRows(a))
    }

    /// Normalizes each row to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let (r, c) = self.shape(a);
        let mut value = Vec::with_capacity(r * c);
        let mut rstd = Vec::with_capacity(r);
        for row in self.nodes[a].value.chunks(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + eps).sqrt();
            value.extend(row.iter().map(|x| (x - mean) * s));
            rstd.push(s);
        }
        let ng = self.ng(a);
        self.push(r, c, value, ng, Op::LayerNorm(a, rstd))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.shape(parts[0]).0;
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let (pr, pc) = self.shape(p);
                assert_eq!(pr, rows, "concat_cols row counts");
                value.extend_from_slice(&self.nodes[p].value[r * pc..(r + 1) * pc]);
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(rows, cols, value, ng, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.shape(a);
        assert!(start + len <= c);
        let value = self.nodes[a]
            .value
            .chunks(c)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let ng = self.ng(a);
        self.push(r, len, value, ng, Op::SliceCols(a, start))
    }

    /// Row-major reshape; the data order is unchanged.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        assert_eq!(self.nodes[a].value.len(), rows * cols);
        let value = self.nodes[a].value.clone();
        let ng = self.ng(a);
        self.push(rows, cols, value, ng, Op::Reshape(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let value = transpose(&self.nodes[a].value, r, c);
        let ng = self.ng(a);
        self.push(c, r, value, ng, Op::Transpose(a))
    }

    /// Picks single entries into a k x 1 column.
    pub fn pick(&mut self, a: Var, at: &[(usize, usize)]) -> Var {
        let c = self.shape(a).1;
        let value = at
            .iter()
            .map(|&(i, j)| self.nodes[a].value[i * c + j])
            .collect();
        let ng = self.ng(a);
        self.push(at.len(), 1, value, ng, Op::Pick(a, at.to_vec()))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = vec![self.nodes[a].value.iter().sum()];
        let ng = self.ng(a);
        self.push(1, 1, value, ng, Op::Sum(a))
    }

    /// Summed (focal) cross-entropy of row-wise softmax against class targets.
    pub fn softmax_ce(&mut self, logits: Var, targets: &[usize], gamma: f64) -> Var {
        let (r, c) = self.shape(logits);
        assert_eq!(r, targets.len());
        let logp = log_softmax_rows(&self.nodes[logits].value, c);
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let lp = logp[i * c + t];
            total += focal_nll(lp, gamma);
        }
        let probs = logp.into_iter().map(f64::exp).collect();
        let ng = self.ng(logits);
        self.push(
            1,
            1,
            vec![total],
            ng,
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                gamma,
                probs,
            },
        )
    }

    /// Summed (focal) binary cross-entropy with logits, optionally weighted
    /// per entry.
    pub fn bce(
        &mut self,
        logits: Var,
        targets: &[bool],
        weights: Option<&[f64]>,
        gamma: f64,
    ) -> Var {
        let x = &self.nodes[logits].value;
        assert_eq!(x.len(), targets.len());
        let mut total = 0.0;
        for (i, (&xi, &y)) in x.iter().zip(targets).enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            if w == 0.0 {
                continue;
            }
            total += w * focal_bce(if y { xi } else { -xi }, gamma);
        }
        let ng = self.ng(logits);
        self.push(
            1,
            1,
            vec![total],
            ng,
            Op::Bce {
                logits,
                targets: targets.to_vec(),
                weights: weights.map(<[f64]>::to_vec),
                gamma,
            },
        )
    }

    /// Accumulates d(output)/d(param) into the store's gradient buffers.
    pub fn backward(&self, output: Var, store: &mut ParamStore) {
        assert_eq!(
            self.nodes[output].value.len(),
            1,
            "backward needs a scalar output"
        );
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output] = Some(vec![1.0]);
        for id in (0..=output).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let send = |target: Var, delta: Vec<f64>, grads: &mut Vec<Option<Vec<f64>>>| {
                if !self.nodes[target].needs_grad {
                    return;
                }
                match &mut grads[target] {
                    Some(existing) => acc(existing, &delta),
                    slot => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Const => {}
                Op::Param(pid) => acc(&mut store.get_mut(*pid).grad, &g),
                Op::GatherParam(pid, idx) => {
                    let p = store.get_mut(*pid);
                    let c = p.cols;
                    for (r, &i) in idx.iter().enumerate() {
                        acc(&mut p.grad[i * c..(i + 1) * c], &g[r * c..(r + 1) * c]);
                    }
                }
                Op::Gather(a, idx) => {
                    let (ar, c) = self.shape(*a);
                    let mut d = vec![0.0; ar * c];
                    for (r, &i) in idx.iter().enumerate() {
                        acc(&mut d[i * c..(i + 1) * c], &g[r * c..(r + 1) * c]);
                    }
                    send(*a, d, &mut grads);
                }
                Op::MatMul(a, b) => {
                    let (n, k) = self.shape(*a);
                    let m = self.shape(*b).1;
                    if self.ng(*a) {
                        // dA = G B^T
                        send(*a, matmul_t(&g, &self.nodes[*b].value, n, m, k), &mut grads);
                    }
                    if self.ng(*b) {
                        // dB = A^T G
                        send(*b, t_matmul(&self.nodes[*a].value, &g, n, k, m), &mut grads);
                    }
                }
                Op::MatMulT(a, b) => {
                    let (n, k) = self.shape(*a);
                    let m = self.shape(*b).0;
                    if self.ng(*a) {
                        // dA = G B
                        send(*a, matmul(&g, &self.nodes[*b].value, n, m, k), &mut grads);
                    }
                    if self.ng(*b) {
                        // dB = G^T A
                        send(*b, t_matmul(&g, &self.nodes[*a].value, n, m, k), &mut grads);
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone(), &mut grads);
                    send(*b, g, &mut grads);
                }
                Op::Sub(a, b) => {
                    send(*a, g.clone(), &mut grads);
                    send(*b, g.iter().map(|x| -x).collect(), &mut grads);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    if self.ng(*a) {
                        send(
                            *a,
                            g.iter().zip(bv).map(|(x, y)| x * y).collect(),
                            &mut grads,
                        );
                    }
                    if self.ng(*b) {
                        send(
                            *b,
                            g.iter().zip(av).map(|(x, y)| x * y).collect(),
                            &mut grads,
                        );
                    }
                }
                Op::AddRow(a, row) => {
                    let c = node.cols;
                    if self.ng(*row) {
                        let mut d = vec![0.0; c];
                        for gr in g.chunks(c) {
                            acc(&mut d, gr);
                        }
                        send(*row, d, &mut grads);
                    }
                    send(*a, g, &mut grads);
                }
                Op::MulRow(a, row) => {
                    let c = node.cols;
                    let (av, rv) = (&self.nodes[*a].value, &self.nodes[*row].value);
                    if self.ng(*row) {
                        let mut d = vec![0.0; c];
                        for (gr, ar) in g.chunks(c).zip(av.chunks(c)) {
                            for j in 0..c {
                                d[j] += gr[j] * ar[j];
                            }
                        }
                        send(*row, d, &mut grads);
                    }
                    if self.ng(*a) {
                        let d = g
                            .chunks(c)
                            .flat_map(|gr| gr.iter().zip(rv).map(|(x, y)| x * y))
                            .collect();
                        send(*a, d, &mut grads);
                    }
                }
                Op::AddScalar(a, s) => {
                    send(*s, vec![g.iter().sum()], &mut grads);
                    send(*a, g, &mut grads);
                }
                Op::Scale(a, k) => send(*a, g.iter().map(|x| x * k).collect(), &mut grads),
                Op::Sigmoid(a) => {
                    let d = g
                        .iter()
                        .zip(&node.value)
                        .map(|(x, s)| x * s * (1.0 - s))
                        .collect();
                    send(*a, d, &mut grads);
                }
                Op::Tanh(a) => {
                    let d = g
                        .iter()
                        .zip(&node.value)
                        .map(|(x, t)| x * (1.0 - t * t))
                        .collect();
                    send(*a, d, &mut grads);
                }
                Op::Gelu(a) => {
                    let d = g
                        .iter()
                        .zip(&self.nodes[*a].value)
                        .map(|(x, &v)| x * gelu_grad(v))
                        .collect();
                    send(*a, d, &mut grads);
                }
                Op::SoftmaxRows(a) => {
                    let c = node.cols;
                    let mut d = vec![0.0; g.len()];
                    for ((gr, yr), dr) in g.chunks(c).zip(node.value.chunks(c)).zip(d.chunks_mut(c))
                    {
                        let dot: f64 = gr.iter().zip(yr).map(|(x, y)| x * y).sum();
                        for j in 0..c {
                            dr[j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    send(*a, d, &mut grads);
                }
                Op::LayerNorm(a, rstd) => {
                    let c = node.cols;
                    let mut d = vec![0.0; g.len()];
                    for (((gr, yr), dr), &s) in g
                        .chunks(c)
                        .zip(node.value.chunks(c))
                        .zip(d.chunks_mut(c))
                        .zip(rstd)
                    {
                        let mean_g = gr.iter().sum::<f64>() / c as f64;
                        let mean_gy = gr.iter().zip(yr).map(|(x, y)| x * y).sum::<f64>() / c as f64;
                        for j in 0..c {
                            dr[j] = s * (gr[j] - mean_g - yr[j] * mean_gy);
                        }
                    }
                    send(*a, d, &mut grads);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pc = self.shape(p).1;
                        if self.ng(p) {
                            let d = g
                                .chunks(node.cols)
                                .flat_map(|row| row[offset..offset + pc].iter().copied())
                                .collect();
                            send(p, d, &mut grads);
                        }
                        offset += pc;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (ar, ac) = self.shape(*a);
                    let mut d = vec![0.0; ar * ac];
                    for (r, gr) in g.chunks(node.cols).enumerate() {
                        d[r * ac + start..r * ac + start + node.cols].copy_from_slice(gr);
                    }
                    send(*a, d, &mut grads);
                }
                Op::Reshape(a) => send(*a, g, &mut grads),
                Op::Transpose(a) => send(*a, transpose(&g, node.rows, node.cols), &mut grads),
                Op::Pick(a, at) => {
                    let (ar, ac) = self.shape(*a);
                    let mut d = vec![0.0; ar * ac];
                    for (k, &(i, j)) in at.iter().enumerate() {
                        d[i * ac + j] += g[k];
                    }
                    send(*a, d, &mut grads);
                }
                Op::Sum(a) => {
                    let n = self.nodes[*a].value.len();
                    send(*a, vec![g[0]; n], &mut grads);
                }
                Op::SoftmaxCe {
                    logits,
                    targets,
                    gamma,
                    probs,
                } => {
                    let c = self.shape(*logits).1;
                    let mut d = vec![0.0; probs.len()];
                    for (i, &t) in targets.iter().enumerate() {
                        let row = &probs[i * c..(i + 1) * c];
                        let p_t = row[t];
                        let lp =
                            log_softmax_rows(&self.nodes[*logits].value[i * c..(i + 1) * c], c)[t];
                        let coef = focal_softmax_coef(p_t, lp, *gamma).1;
                        for j in 0..c {
                            let delta = if j == t { 1.0 } else { 0.0 };
                            d[i * c + j] = g[0] * coef * (delta - row[j]);
                        }
                    }
                    send(*logits, d, &mut grads);
                }
                Op::Bce {
                    logits,
                    targets,
                    weights,
                    gamma,
                } => {
                    let x = &self.nodes[*logits].value;
                    let mut d = vec![0.0; x.len()];
                    for (i, (&xi, &y)) in x.iter().zip(targets).enumerate() {
                        let w = weights.as_ref().map_or(1.0, |w| w[i]);
                        if w == 0.0 {
                            continue;
                        }
                        let (z, sign) = if y { (xi, 1.0) } else { (-xi, -1.0) };
                        let s = sigmoid(z);
                        let q = 1.0 - s;
                        let dz = if *gamma == 0.0 {
                            -q
                        } else {
                            gamma * s * q.powf(*gamma) * log_sigmoid(z) - q.powf(gamma + 1.0)
                        };
                        d[i] = g[0] * w * dz * sign;
                    }
                    send(*logits, d, &mut grads);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Group;

    /// Checks every parameter coordinate of `f` against central differences.
    fn check(store: &mut ParamStore, f: impl Fn(&mut Tape, &ParamStore) -> Var) {
        store.zero_grad();
        let mut tape = Tape::new();
        let out = f(&mut tape, store);
        tape.backward(out, store);
        let eps = 1e-6;
        for id in store.ids() {
            for k in 0..store.get(id).value.len() {
                let orig = store.get(id).value[k];
                store.get_mut(id).value[k] = orig + eps;
                let mut t = Tape::new();
                let o = f(&mut t, store);
                let up = t.scalar(o);
                store.get_mut(id).value[k] = orig - eps;
                let mut t = Tape::new();
                let o = f(&mut t, store);
                let down = t.scalar(o);
                store.get_mut(id).value[k] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let analytic = store.get(id).grad[k];
                let err = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                assert!(
                    err < 1e-6,
                    "{} [{k}]: analytic {analytic} numeric {numeric}",
                    store.get(id).name
                );
            }
        }
    }

    fn store_with(shapes: &[(usize, usize)], seed: u64) -> ParamStore {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        for (i, &(r, c)) in shapes.iter().enumerate() {
            let v = (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect();
            store.add(format!("p{i}"), r, c, v, Group::Decoder);
        }
        store
    }

    #[test]
    fn matmul_family_gradients() {
        let mut store = store_with(&[(3, 4), (4, 2), (5, 4), (1, 2)], 1);
        let ids = store.ids();
        check(&mut store, |t, s| {
            let a = t.param(s, ids[0]);
            let b = t.param(s, ids[1]);
            let c = t.param(s, ids[2]);
            let r = t.param(s, ids[3]);
            let ab = t.matmul(a, b);
            let ab = t.add_row(ab, r);
            let act = t.mul_row(ab, r);
            let ac = t.matmul_t(a, c);
            let tr = t.transpose(ac);
            let x = t.matmul(tr, act);
            let y = t.tanh(x);
            t.sum(y)
        });
    }

    #[test]
    fn nonlinearities_and_norms() {
        let mut store = store_with(&[(3, 5), (1, 1), (1, 5)], 2);
        let ids = store.ids();
        check(&mut store, |t, s| {
            let a = t.param(s, ids[0]);
            let b = t.param(s, ids[1]);
            let g = t.param(s, ids[2]);
            let n = t.layer_norm(a, 1e-5);
            let n = t.mul_row(n, g);
            let sm = t.softmax_rows(n);
            let ge = t.gelu(a);
            let sg = t.sigmoid(ge);
            let z = t.add_scalar(sg, b);
            let m = t.mul(z, sm);
            let w = t.constant(3, 5, (0..15).map(|i| i as f64 * 0.1).collect());
            let m = t.mul(m, w);
            let sub = t.sub(m, sm);
            let sc = t.scale(sub, 0.7);
            t.sum(sc)
        });
    }

    #[test]
    fn structural_ops() {
        let mut store = store_with(&[(4, 3), (4, 2), (6, 3)], 3);
        let ids = store.ids();
        check(&mut store, |t, s| {
            let a = t.param(s, ids[0]);
            let b = t.param(s, ids[1]);
            let cat = t.concat_cols(&[a, b, a]);
            let sl = t.slice_cols(cat, 2, 4);
            let rs = t.reshape(sl, 2, 8);
            let g = t.gather(rs, &[1, 0, 1]);
            let gp = t.gather_param(s, ids[2], &[5, 0, 5, 2]);
            let p = t.pick(gp, &[(0, 1), (2, 2), (0, 1)]);
            let sq = t.mul(g, g);
            let s1 = t.sum(sq);
            let s2 = t.sum(p);
            let s3 = t.mul(s2, s2);
            t.add(s1, s3)
        });
    }

    #[test]
    fn loss_gradients_with_and_without_focal() {
        for gamma in [0.0, 2.0] {
            let mut store = store_with(&[(4, 3), (2, 5)], 4);
            let ids = store.ids();
            check(&mut store, |t, s| {
                let a = t.param(s, ids[0]);
                let b = t.param(s, ids[1]);
                let a3 = t.scale(a, 3.0);
                let ce = t.softmax_ce(a3, &[0, 2, 1, 2], gamma);
                let targets = [
                    true, false, false, true, true, false, true, false, false, true,
                ];
                let w = [1.0, 0.5, 0.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
                let bce = t.bce(b, &targets, Some(&w), gamma);
                t.add(ce, bce)
            });
        }
    }

    #[test]
    fn losses_are_stable_at_extreme_logits() {
        let mut t = Tape::new();
        let x = t.constant(1, 4, vec![50.0, -50.0, 50.0, -50.0]);
        let b = t.bce(x, &[true, false, false, true], None, 2.0);
        assert!(t.scalar(b).is_finite());
        let ce = t.softmax_ce(x, &[0], 2.0);
        assert!(t.scalar(ce).is_finite());
        assert!(t.first_non_finite().is_none());
        // confident and correct costs nothing
        let y = t.constant(1, 2, vec![800.0, -800.0]);
        let ok = t.bce(y, &[true, false], None, 0.0);
        assert_eq!(t.scalar(ok), 0.0);
    }

    #[test]
    fn non_finite_values_are_flagged() {
        let mut t = Tape::new();
        let x = t.constant(1, 1, vec![f64::MAX]);
        let _ = t.scale(x, 10.0);
        assert_eq!(t.first_non_finite(), Some(1));
    }
}

//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value and enough saved
//! state to run its backward rule. Nodes are only ever appended, so node
//! indices form a topological order and the backward pass is a single reverse
//! sweep.

use std::collections::BTreeMap;

use super::array::{gemm_nn, gemm_nt, gemm_tn, Array};
use super::params::ParamStore;
use crate::error::{Error, Result};

/// Additive logit used for forbidden attention keys.
pub const MASK_NEG: f64 = -1e9;

/// Lower clamp applied to probabilities inside [`Graph::bce_sum`].
pub const BCE_EPS: f64 = 1e-12;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberately wrong backward rules, used to prove that the gradient checker
/// catches a broken derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fault {
    /// Multiplies the sigmoid backward rule by the given factor.
    SigmoidBackwardScale(f64),
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Bmm(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Gelu(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Gather { table: Var, indices: Vec<usize> },
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Sum(Var),
    BceSum { pred: Var, target: Array, valid: Array },
}

#[derive(Debug)]
struct Node {
    value: Array,
    op: Op,
}

/// A recorded computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
    fault: Option<Fault>,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array>>,
}

impl Gradients {
    /// Gradient of `var`, if it was reached from the loss.
    pub fn get(&self, var: Var) -> Option<&Array> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(fault: Option<Fault>) -> Self {
        Graph { fault, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Array, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that is not tracked as a named parameter.
    pub fn constant(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds the named parameter from `store`. Binding the same name twice
    /// returns the same node so gradients accumulate in one place.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value =
            store.get(name).ok_or_else(|| Error::invalid("param", format!("unknown parameter '{name}'")))?.clone();
        let v = self.push(value, Op::Leaf);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// Parameters bound so far, by name.
    pub fn params(&self) -> &BTreeMap<String, Var> {
        &self.params
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        Ok(self.push(Array::new(vec![m, n], out)?, Op::MatMul(a, b)))
    }

    /// Batched matrix product `[B,m,k] x [B,k,n] -> [B,m,n]`.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(shape_err("bmm", sa, sb));
        }
        let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut out = vec![0.0; bs * m * n];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for t in 0..bs {
            gemm_nn(
                &av[t * m * k..(t + 1) * m * k],
                &bv[t * k * n..(t + 1) * k * n],
                &mut out[t * m * n..(t + 1) * m * n],
                m,
                k,
                n,
            );
        }
        Ok(self.push(Array::new(vec![bs, m, n], out)?, Op::Bmm(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn zip_same(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, rec: Op) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err(op, va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Array::new(va.shape().to_vec(), data)?;
        Ok(self.push(out, rec))
    }

    /// Adds a rank-1 `bias` along the last axis of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        let n = *va.shape().last().unwrap_or(&0);
        if vb.ndim() != 1 || vb.len() != n || va.ndim() == 0 {
            return Err(shape_err("add_bias", va.shape(), vb.shape()));
        }
        let b = vb.data();
        let data = va.data().chunks(n).flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y)).collect();
        let out = Array::new(va.shape().to_vec(), data)?;
        Ok(self.push(out, Op::AddBias(a, bias)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| x * k);
        self.push(out, Op::Scale(a, k))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh()));
        self.push(out, Op::Gelu(a))
    }

    /// Softmax over the last axis. `mask`, when given, is added to the logits
    /// before normalisation and must match the trailing two dimensions of
    /// `a` (it is broadcast over any leading axes).
    pub fn softmax(&mut self, a: Var, mask: Option<&Array>) -> Result<Var> {
        let va = self.value(a);
        let shape = va.shape().to_vec();
        let n = *shape.last().ok_or_else(|| Error::invalid("softmax", "scalar input"))?;
        if let Some(m) = mask {
            let tail = &shape[shape.len().saturating_sub(2)..];
            if m.shape() != tail {
                return Err(shape_err("softmax", &shape, m.shape()));
            }
        }
        let mut data = va.data().to_vec();
        let mask_len = mask.map_or(0, Array::len);
        for (row_idx, row) in data.chunks_mut(n).enumerate() {
            if let Some(m) = mask {
                let off = (row_idx * n) % mask_len;
                for (x, add) in row.iter_mut().zip(&m.data()[off..off + n]) {
                    *x += add;
                }
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                z += *x;
            }
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        Ok(self.push(Array::new(shape, data)?, Op::Softmax(a)))
    }

    /// Layer normalisation over the last axis with learned gain and shift.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (vx, vg, vb) = (self.value(x), self.value(gamma), self.value(beta));
        let n = *vx.shape().last().unwrap_or(&0);
        if vx.ndim() == 0 || vg.shape() != [n] || vb.shape() != [n] {
            return Err(shape_err("layer_norm", vx.shape(), vg.shape()));
        }
        let rows = vx.len() / n;
        let mut xhat = Vec::with_capacity(vx.len());
        let mut rstd = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(vx.len());
        for row in vx.data().chunks(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd.push(r);
            for (i, v) in row.iter().enumerate() {
                let h = (v - mean) * r;
                xhat.push(h);
                out.push(h * vg.data()[i] + vb.data()[i]);
            }
        }
        let out = Array::new(vx.shape().to_vec(), out)?;
        Ok(self.push(out, Op::LayerNorm { x, gamma, beta, xhat, rstd }))
    }

    /// Selects rows of `table` along its first axis (embedding lookup).
    pub fn gather(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let vt = self.value(table);
        if vt.ndim() == 0 {
            return Err(Error::invalid("gather", "scalar table"));
        }
        let rows = vt.shape()[0];
        let width = vt.len() / rows.max(1);
        let mut data = Vec::with_capacity(indices.len() * width);
        for &i in indices {
            if i >= rows {
                return Err(Error::invalid("gather", format!("index {i} out of range for {rows} rows")));
            }
            data.extend_from_slice(&vt.data()[i * width..(i + 1) * width]);
        }
        let mut shape = vt.shape().to_vec();
        shape[0] = indices.len();
        let out = Array::new(shape, data)?;
        Ok(self.push(out, Op::Gather { table, indices: indices.to_vec() }))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let out = self.value(a).permuted(axes)?;
        Ok(self.push(out, Op::Permute(a, axes.to_vec())))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        if self.value(a).ndim() != 2 {
            return Err(Error::invalid("transpose", "expects a 2-D input"));
        }
        self.permute(a, &[1, 0])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Array::scalar(s), Op::Sum(a))
    }

    /// Sum of binary cross-entropy over cells where `valid` is 1.
    ///
    /// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]`; the backward rule
    /// is evaluated at the clamped value. Cells with `valid == 0` receive an
    /// exactly-zero gradient.
    pub fn bce_sum(&mut self, pred: Var, target: &Array, valid: &Array) -> Result<Var> {
        let vp = self.value(pred);
        if vp.shape() != target.shape() || vp.shape() != valid.shape() {
            return Err(shape_err("bce_sum", vp.shape(), target.shape()));
        }
        let mut loss = 0.0;
        for ((&p, &y), &m) in vp.data().iter().zip(target.data()).zip(valid.data()) {
            if m != 0.0 {
                loss += m * bce(y, p);
            }
        }
        Ok(self.push(Array::scalar(loss), Op::BceSum { pred, target: target.clone(), valid: valid.clone() }))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array::full(lv.shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backward_node(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Parameter gradients by name. Parameters bound in the graph but not
    /// reached from the loss get zeros.
    pub fn param_grads(&self, grads: &Gradients) -> ParamStore {
        let mut out = ParamStore::new();
        for (name, &v) in &self.params {
            let g = grads.get(v).cloned().unwrap_or_else(|| Array::zeros(self.shape(v)));
            out.insert(name.clone(), g);
        }
        out
    }

    fn backward_node(&self, idx: usize, g: &Array, grads: &mut [Option<Array>]) -> Result<()> {
        let node = &self.nodes[idx];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let mut da = vec![0.0; m * k];
                gemm_nt(g.data(), self.value(*b).data(), &mut da, m, n, k);
                let mut db = vec![0.0; k * n];
                gemm_tn(self.value(*a).data(), g.data(), &mut db, m, k, n);
                accumulate(grads, *a, Array::new(vec![m, k], da)?);
                accumulate(grads, *b, Array::new(vec![k, n], db)?);
            }
            Op::Bmm(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let mut da = vec![0.0; bs * m * k];
                let mut db = vec![0.0; bs * k * n];
                for t in 0..bs {
                    let gt = &g.data()[t * m * n..(t + 1) * m * n];
                    gemm_nt(gt, &bv[t * k * n..(t + 1) * k * n], &mut da[t * m * k..(t + 1) * m * k], m, n, k);
                    gemm_tn(&av[t * m * k..(t + 1) * m * k], gt, &mut db[t * k * n..(t + 1) * k * n], m, k, n);
                }
                accumulate(grads, *a, Array::new(sa.to_vec(), da)?);
                accumulate(grads, *b, Array::new(sb.to_vec(), db)?);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddBias(a, bias) => {
                let n = self.value(*bias).len();
                let mut db = vec![0.0; n];
                for row in g.data().chunks(n) {
                    for (d, x) in db.iter_mut().zip(row) {
                        *d += x;
                    }
                }
                accumulate(grads, *a, g.clone());
                accumulate(grads, *bias, Array::new(vec![n], db)?);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, zip_map(g, vb, |gi, y| gi * y));
                accumulate(grads, *b, zip_map(g, va, |gi, x| gi * x));
            }
            Op::Scale(a, k) => accumulate(grads, *a, g.map(|x| x * k)),
            Op::Sigmoid(a) => {
                let factor = match self.fault {
                    Some(Fault::SigmoidBackwardScale(f)) => f,
                    None => 1.0,
                };
                accumulate(grads, *a, zip_map(g, out, |gi, y| factor * gi * y * (1.0 - y)));
            }
            Op::Tanh(a) => accumulate(grads, *a, zip_map(g, out, |gi, y| gi * (1.0 - y * y))),
            Op::Gelu(a) => {
                let d = zip_map(g, self.value(*a), |gi, x| {
                    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
                    let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x);
                    gi * (0.5 * (1.0 + t) + 0.5 * x * dt)
                });
                accumulate(grads, *a, d);
            }
            Op::Softmax(a) => {
                let n = *out.shape().last().unwrap();
                let mut d = Vec::with_capacity(out.len());
                for (y, gy) in out.data().chunks(n).zip(g.data().chunks(n)) {
                    let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                    d.extend(y.iter().zip(gy).map(|(yi, gi)| yi * (gi - dot)));
                }
                accumulate(grads, *a, Array::new(out.shape().to_vec(), d)?);
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let vg = self.value(*gamma).data();
                let n = vg.len();
                let mut dgamma = vec![0.0; n];
                let mut dbeta = vec![0.0; n];
                let mut dx = Vec::with_capacity(g.len());
                for ((gy, xh), &r) in g.data().chunks(n).zip(xhat.chunks(n)).zip(rstd) {
                    let mut mean_d = 0.0;
                    let mut mean_dx = 0.0;
                    for i in 0..n {
                        dgamma[i] += gy[i] * xh[i];
                        dbeta[i] += gy[i];
                        let dh = gy[i] * vg[i];
                        mean_d += dh;
                        mean_dx += dh * xh[i];
                    }
                    mean_d /= n as f64;
                    mean_dx /= n as f64;
                    for i in 0..n {
                        dx.push(r * (gy[i] * vg[i] - mean_d - xh[i] * mean_dx));
                    }
                }
                accumulate(grads, *x, Array::new(out.shape().to_vec(), dx)?);
                accumulate(grads, *gamma, Array::new(vec![n], dgamma)?);
                accumulate(grads, *beta, Array::new(vec![n], dbeta)?);
            }
            Op::Gather { table, indices } => {
                let vt = self.value(*table);
                let width = vt.len() / vt.shape()[0].max(1);
                let mut d = Array::zeros(vt.shape());
                let dd = d.data_mut();
                for (row, &i) in indices.iter().enumerate() {
                    for (t, s) in
                        dd[i * width..(i + 1) * width].iter_mut().zip(&g.data()[row * width..(row + 1) * width])
                    {
                        *t += s;
                    }
                }
                accumulate(grads, *table, d);
            }
            Op::Reshape(a) => {
                let d = g.clone().reshaped(self.shape(*a))?;
                accumulate(grads, *a, d);
            }
            Op::Permute(a, axes) => {
                let mut inv = vec![0; axes.len()];
                for (i, &ax) in axes.iter().enumerate() {
                    inv[ax] = i;
                }
                accumulate(grads, *a, g.permuted(&inv)?);
            }
            Op::Sum(a) => {
                let s = g.item();
                accumulate(grads, *a, Array::full(self.shape(*a), s));
            }
            Op::BceSum { pred, target, valid } => {
                let s = g.item();
                let vp = self.value(*pred);
                let d = vp
                    .data()
                    .iter()
                    .zip(target.data())
                    .zip(valid.data())
                    .map(|((&p, &y), &m)| {
                        if m == 0.0 {
                            0.0
                        } else {
                            let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                            s * m * (-(y / pc) + (1.0 - y) / (1.0 - pc))
                        }
                    })
                    .collect();
                accumulate(grads, *pred, Array::new(vp.shape().to_vec(), d)?);
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy with the prediction clamped to `[BCE_EPS, 1-BCE_EPS]`.
pub fn bce(y: f64, p: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape { op, lhs: a.to_vec(), rhs: b.to_vec() }
}

fn zip_map(a: &Array, b: &Array, f: impl Fn(f64, f64) -> f64) -> Array {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Array::new(a.shape().to_vec(), data).expect("same shape")
}

fn accumulate(grads: &mut [Option<Array>], v: Var, g: Array) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

//! Score heads mapping schema rows `H_s` and text rows `H_x` to a score
//! tensor `S` of shape `[N_s, N_x, N_x]`.
//!
//! Both heads first map the text through two independent feed-forward
//! nets, `H_x^s = FFN_s(H_x)` and `H_x^e = FFN_e(H_x)`, each
//! `d -> d -> d` with GELU.
//!
//! * Triaffine: `S[r,p,q] = σ(Σ_abc W[a,b,c] H_s[r,a] H_x^s[p,b] H_x^e[q,c])`.
//!   `W` is contracted with `H_s` first, then with `H_x^s`, then `H_x^e`.
//! * Multi-head selection: `S[r,p,q] = σ((H_s U)[r]·H_x^s[p] + (H_s V)[r]·H_x^e[q])`.
//!   The logit is additive in `p` and `q`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{normal_array, Encodings};
use crate::error::{Error, Result};
use crate::ndiff::{sigmoid, Array, Graph, ParamStore, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringHead {
    #[default]
    Triaffine,
    MultiHeadSelection,
}

/// Rank-3 sigmoid scores, one `[N_x, N_x]` table per schema.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTensor {
    values: Array,
}

impl ScoreTensor {
    pub fn from_array(values: Array) -> Result<Self> {
        let s = values.shape();
        if s.len() != 3 || s[1] != s[2] {
            return Err(Error::invalid("score tensor", format!("expected [N_s, N_x, N_x], got {s:?}")));
        }
        Ok(ScoreTensor { values })
    }

    pub fn n_schemas(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn n_text(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn values(&self) -> &Array {
        &self.values
    }

    pub fn into_array(self) -> Array {
        self.values
    }

    pub fn get(&self, r: usize, p: usize, q: usize) -> f64 {
        let n = self.n_text();
        self.values.data()[(r * n + p) * n + q]
    }

    pub fn set(&mut self, r: usize, p: usize, q: usize, v: f64) {
        let n = self.n_text();
        self.values.data_mut()[(r * n + p) * n + q] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.values.data_mut().fill(v);
    }

    /// Table `i` of the result is table `order[i]` of `self`.
    pub fn permute_schemas(&self, order: &[usize]) -> Self {
        let n = self.n_text();
        let mut data = Vec::with_capacity(order.len() * n * n);
        for &r in order {
            data.extend_from_slice(&self.values.data()[r * n * n..(r + 1) * n * n]);
        }
        ScoreTensor { values: Array::new(vec![order.len(), n, n], data).expect("consistent size") }
    }
}

const FFN_PREFIX: [&str; 2] = ["head.ffn_s", "head.ffn_e"];

/// Adds the head parameters for `head` at hidden size `d`: weights
/// `N(0, std²)`, biases 0.
pub fn init_head_params(head: ScoringHead, d: usize, std: f64, store: &mut ParamStore, rng: &mut impl Rng) {
    for prefix in FFN_PREFIX {
        store.insert(format!("{prefix}.w1"), normal_array(&[d, d], std, rng));
        store.insert(format!("{prefix}.b1"), Array::zeros(&[d]));
        store.insert(format!("{prefix}.w2"), normal_array(&[d, d], std, rng));
        store.insert(format!("{prefix}.b2"), Array::zeros(&[d]));
    }
    match head {
        ScoringHead::Triaffine => store.insert("head.w", normal_array(&[d, d, d], std, rng)),
        ScoringHead::MultiHeadSelection => {
            store.insert("head.u", normal_array(&[d, d], std, rng));
            store.insert("head.v", normal_array(&[d, d], std, rng));
        }
    }
}

/// `d -> d -> d` feed-forward net with GELU.
pub fn ffn_on(g: &mut Graph, x: Var, params: &ParamStore, prefix: &str) -> Result<Var> {
    let w1 = g.param(params, &format!("{prefix}.w1"))?;
    let b1 = g.param(params, &format!("{prefix}.b1"))?;
    let w2 = g.param(params, &format!("{prefix}.w2"))?;
    let b2 = g.param(params, &format!("{prefix}.b2"))?;
    let h = g.matmul(x, w1)?;
    let h = g.add_bias(h, b1)?;
    let h = g.gelu(h);
    let y = g.matmul(h, w2)?;
    g.add_bias(y, b2)
}

fn rows(g: &Graph, v: Var, what: &str) -> Result<(usize, usize)> {
    match *g.shape(v) {
        [n, d] => Ok((n, d)),
        ref s => Err(Error::invalid("score", format!("{what} must be 2-D, got {s:?}"))),
    }
}

/// Triaffine logits `[N_s, N_x, N_x]` from `H_s`, `H_x^s`, `H_x^e` and `W`.
pub fn triaffine_logits_on(g: &mut Graph, hs: Var, hxs: Var, hxe: Var, w: Var) -> Result<Var> {
    let (ns, d) = rows(g, hs, "H_s")?;
    let (nx, ds) = rows(g, hxs, "H_x^s")?;
    let (nxe, de) = rows(g, hxe, "H_x^e")?;
    if ds != d || de != d || nxe != nx {
        return Err(Error::Shape { op: "triaffine", lhs: g.shape(hxs).to_vec(), rhs: g.shape(hxe).to_vec() });
    }
    if g.shape(w) != [d, d, d] {
        return Err(Error::Shape { op: "triaffine", lhs: g.shape(hs).to_vec(), rhs: g.shape(w).to_vec() });
    }
    // t1[r, b, c] = Σ_a H_s[r, a] W[a, b, c]
    let w2 = g.reshape(w, &[d, d * d])?;
    let t1 = g.matmul(hs, w2)?;
    // t2[p, r, c] = Σ_b H_x^s[p, b] t1[r, b, c]
    let t1 = g.reshape(t1, &[ns, d, d])?;
    let t1 = g.permute(t1, &[1, 0, 2])?;
    let t1 = g.reshape(t1, &[d, ns * d])?;
    let t2 = g.matmul(hxs, t1)?;
    // logits[r, p, q] = Σ_c t2[p, r, c] H_x^e[q, c]
    let t2 = g.reshape(t2, &[nx, ns, d])?;
    let t2 = g.permute(t2, &[1, 0, 2])?;
    let t2 = g.reshape(t2, &[ns * nx, d])?;
    let hxe_t = g.transpose(hxe)?;
    let l = g.matmul(t2, hxe_t)?;
    g.reshape(l, &[ns, nx, nx])
}

/// Multi-head selection logits `[N_s, N_x, N_x]`.
pub fn multihead_logits_on(g: &mut Graph, hs: Var, hxs: Var, hxe: Var, u: Var, v: Var) -> Result<Var> {
    let (ns, _) = rows(g, hs, "H_s")?;
    let (nx, _) = rows(g, hxs, "H_x^s")?;
    let hs_u = g.matmul(hs, u)?;
    let hxs_t = g.transpose(hxs)?;
    let start = g.matmul(hs_u, hxs_t)?;
    let hs_v = g.matmul(hs, v)?;
    let hxe_t = g.transpose(hxe)?;
    let end = g.matmul(hs_v, hxe_t)?;
    if g.shape(end) != [ns, nx] {
        return Err(Error::Shape {
            op: "multi-head selection",
            lhs: g.shape(start).to_vec(),
            rhs: g.shape(end).to_vec(),
        });
    }
    // replicate start over q and end over p with rank-1 products against ones
    let ones_q = g.constant(Array::ones(&[ns, 1, nx]));
    let ones_p = g.constant(Array::ones(&[ns, nx, 1]));
    let start = g.reshape(start, &[ns, nx, 1])?;
    let end = g.reshape(end, &[ns, 1, nx])?;
    let a = g.bmm(start, ones_q)?;
    let b = g.bmm(ones_p, end)?;
    g.add(a, b)
}

/// Full head on graph handles: both FFNs, the chosen interaction, sigmoid.
pub fn score_on(g: &mut Graph, hs: Var, hx: Var, head: ScoringHead, params: &ParamStore) -> Result<Var> {
    let hxs = ffn_on(g, hx, params, FFN_PREFIX[0])?;
    let hxe = ffn_on(g, hx, params, FFN_PREFIX[1])?;
    let logits = match head {
        ScoringHead::Triaffine => {
            let w = g.param(params, "head.w")?;
            triaffine_logits_on(g, hs, hxs, hxe, w)?
        }
        ScoringHead::MultiHeadSelection => {
            let u = g.param(params, "head.u")?;
            let v = g.param(params, "head.v")?;
            multihead_logits_on(g, hs, hxs, hxe, u, v)?
        }
    };
    Ok(g.sigmoid(logits))
}

fn finish(g: &Graph, s: Var) -> Result<ScoreTensor> {
    ScoreTensor::from_array(g.value(s).clone())
}

/// Triaffine scores for encoded rows under `params`.
pub fn triaffine_score(enc: &Encodings, params: &ParamStore) -> Result<ScoreTensor> {
    let mut g = Graph::new();
    let hs = g.constant(enc.hs.clone());
    let hx = g.constant(enc.hx.clone());
    let s = score_on(&mut g, hs, hx, ScoringHead::Triaffine, params)?;
    finish(&g, s)
}

/// Multi-head selection scores for encoded rows under `params`.
pub fn multihead_selection_score(enc: &Encodings, params: &ParamStore) -> Result<ScoreTensor> {
    let mut g = Graph::new();
    let hs = g.constant(enc.hs.clone());
    let hx = g.constant(enc.hx.clone());
    let s = score_on(&mut g, hs, hx, ScoringHead::MultiHeadSelection, params)?;
    finish(&g, s)
}

/// Triaffine scores from already transformed rows (no FFNs).
pub fn triaffine_from_parts(hs: &Array, hxs: &Array, hxe: &Array, w: &Array) -> Result<ScoreTensor> {
    let mut g = Graph::new();
    let (hs, hxs, hxe, w) =
        (g.constant(hs.clone()), g.constant(hxs.clone()), g.constant(hxe.clone()), g.constant(w.clone()));
    let l = triaffine_logits_on(&mut g, hs, hxs, hxe, w)?;
    let s = g.sigmoid(l);
    finish(&g, s)
}

/// Multi-head selection scores from already transformed rows (no FFNs).
pub fn multihead_from_parts(hs: &Array, hxs: &Array, hxe: &Array, u: &Array, v: &Array) -> Result<ScoreTensor> {
    let mut g = Graph::new();
    let (hs, hxs, hxe, u, v) = (
        g.constant(hs.clone()),
        g.constant(hxs.clone()),
        g.constant(hxe.clone()),
        g.constant(u.clone()),
        g.constant(v.clone()),
    );
    let l = multihead_logits_on(&mut g, hs, hxs, hxe, u, v)?;
    let s = g.sigmoid(l);
    finish(&g, s)
}

fn gelu_scalar(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn ffn_naive(x: &Array, params: &ParamStore, prefix: &str) -> Result<Array> {
    let get = |n: &str| {
        params
            .get(&format!("{prefix}.{n}"))
            .ok_or_else(|| Error::invalid("score", format!("missing parameter {prefix}.{n}")))
    };
    let (w1, b1, w2, b2) = (get("w1")?, get("b1")?, get("w2")?, get("b2")?);
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let mut out = Array::zeros(&[n, d]);
    for i in 0..n {
        let mut hidden = vec![0.0; d];
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut acc = b1.data()[j];
            for k in 0..d {
                acc += x.at(&[i, k]) * w1.at(&[k, j]);
            }
            *h = gelu_scalar(acc);
        }
        for j in 0..d {
            let mut acc = b2.data()[j];
            for (k, h) in hidden.iter().enumerate() {
                acc += h * w2.at(&[k, j]);
            }
            out.set(&[i, j], acc);
        }
    }
    Ok(out)
}

/// Reference triaffine head evaluated cell by cell with an explicit
/// quadruple sum.
pub fn triaffine_naive_from_parts(hs: &Array, hxs: &Array, hxe: &Array, w: &Array) -> Result<ScoreTensor> {
    let (ns, d) = (hs.shape()[0], hs.shape()[1]);
    let nx = hxs.shape()[0];
    if w.shape() != [d, d, d] || hxs.shape() != [nx, d] || hxe.shape() != [nx, d] {
        return Err(Error::Shape { op: "triaffine (naive)", lhs: hs.shape().to_vec(), rhs: w.shape().to_vec() });
    }
    let mut out = Array::zeros(&[ns, nx, nx]);
    for r in 0..ns {
        for p in 0..nx {
            for q in 0..nx {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        for c in 0..d {
                            acc += w.at(&[a, b, c]) * hs.at(&[r, a]) * hxs.at(&[p, b]) * hxe.at(&[q, c]);
                        }
                    }
                }
                out.set(&[r, p, q], sigmoid(acc));
            }
        }
    }
    ScoreTensor::from_array(out)
}

/// [`triaffine_score`] computed with plain loops throughout.
pub fn triaffine_score_naive(enc: &Encodings, params: &ParamStore) -> Result<ScoreTensor> {
    let hxs = ffn_naive(&enc.hx, params, FFN_PREFIX[0])?;
    let hxe = ffn_naive(&enc.hx, params, FFN_PREFIX[1])?;
    let w = params.get("head.w").ok_or_else(|| Error::invalid("score", "missing parameter head.w"))?;
    triaffine_naive_from_parts(&enc.hs, &hxs, &hxe, w)
}

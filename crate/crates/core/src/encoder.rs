//! Pre-norm transformer encoder over a unified prompt.
//!
//! Parameters (`L` layers, hidden `d`, feed-forward width `f`, vocabulary
//! `V`, position table `P`):
//!
//! | name                       | shape    |
//! |----------------------------|----------|
//! | `emb.tok`                  | `[V, d]` |
//! | `emb.pos`                  | `[P, d]` |
//! | `layer{l}.attn.w{q,k,v,o}` | `[d, d]` |
//! | `layer{l}.attn.b{q,v,o}`   | `[d]`    |
//! | `layer{l}.ln{1,2}.{g,b}`   | `[d]`    |
//! | `layer{l}.ffn.w1`, `.b1`   | `[d, f]`, `[f]` |
//! | `layer{l}.ffn.w2`, `.b2`   | `[f, d]`, `[d]` |
//! | `final_ln.{g,b}`           | `[d]`    |
//!
//! so the parameter count is
//! `V·d + P·d + L·(4d² + 3d + 4d + d·f + f + f·d + d) + 2d`.
//!
//! Keys carry no bias: a per-query constant added to every attention logit
//! cancels in the softmax.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndiff::{Array, Graph, ParamStore, Var};
use crate::schema::UnifiedInput;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub layers: usize,
    pub d: usize,
    pub heads: usize,
    pub ffn_hidden: usize,
    pub vocab_size: usize,
    pub max_position: usize,
    pub seed: u64,
    pub init_std: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 2,
            d: 64,
            heads: 4,
            ffn_hidden: 256,
            vocab_size: 0,
            max_position: 576,
            seed: 0,
            init_std: 0.02,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.d == 0 || self.heads == 0 || self.ffn_hidden == 0 || self.vocab_size == 0 || self.max_position == 0 {
            return bad("encoder sizes must be positive");
        }
        if !self.d.is_multiple_of(self.heads) {
            return Err(Error::Config(format!("d = {} is not divisible by heads = {}", self.d, self.heads)));
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return bad("init_std must be finite and non-negative");
        }
        Ok(())
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let (d, f) = (self.d, self.ffn_hidden);
        self.vocab_size * d
            + self.max_position * d
            + self.layers * (4 * d * d + 3 * d + 4 * d + d * f + f + f * d + d)
            + 2 * d
    }
}

/// `N(0, std²)` entries.
pub fn normal_array(shape: &[usize], std: f64, rng: &mut impl Rng) -> Array {
    if std == 0.0 {
        return Array::zeros(shape);
    }
    let dist = Normal::new(0.0, std).expect("finite std");
    Array::from_fn(shape, |_| dist.sample(rng))
}

/// Adds the encoder parameters to `store`: weights `N(0, init_std²)`,
/// layer-norm gains 1, every bias and shift 0.
pub fn init_params(config: &EncoderConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
    config.validate()?;
    let (d, f, s) = (config.d, config.ffn_hidden, config.init_std);
    store.insert("emb.tok", normal_array(&[config.vocab_size, d], s, rng));
    store.insert("emb.pos", normal_array(&[config.max_position, d], s, rng));
    for l in 0..config.layers {
        let p = |n: &str| format!("layer{l}.{n}");
        for w in ["q", "k", "v", "o"] {
            store.insert(p(&format!("attn.w{w}")), normal_array(&[d, d], s, rng));
            if w != "k" {
                store.insert(p(&format!("attn.b{w}")), Array::zeros(&[d]));
            }
        }
        for ln in ["ln1", "ln2"] {
            store.insert(p(&format!("{ln}.g")), Array::ones(&[d]));
            store.insert(p(&format!("{ln}.b")), Array::zeros(&[d]));
        }
        store.insert(p("ffn.w1"), normal_array(&[d, f], s, rng));
        store.insert(p("ffn.b1"), Array::zeros(&[f]));
        store.insert(p("ffn.w2"), normal_array(&[f, d], s, rng));
        store.insert(p("ffn.b2"), Array::zeros(&[d]));
    }
    store.insert("final_ln.g", Array::ones(&[d]));
    store.insert("final_ln.b", Array::zeros(&[d]));
    Ok(())
}

/// Graph handles of the schema rows `[N_s, d]` and text rows `[N_x, d]`.
#[derive(Clone, Copy, Debug)]
pub struct EncodedVars {
    pub hs: Var,
    pub hx: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encodings {
    pub hs: Array,
    pub hx: Array,
}

fn linear(g: &mut Graph, x: Var, params: &ParamStore, w: &str, b: &str) -> Result<Var> {
    let w = g.param(params, w)?;
    let b = g.param(params, b)?;
    let y = g.matmul(x, w)?;
    g.add_bias(y, b)
}

fn check_finite(g: &Graph, v: Var, where_: &str) -> Result<()> {
    if g.value(v).is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("encoder activation at {where_}")))
    }
}

/// Records the encoder forward pass on `g`.
pub fn encode_on(
    g: &mut Graph,
    input: &UnifiedInput,
    config: &EncoderConfig,
    params: &ParamStore,
) -> Result<EncodedVars> {
    if let Some(&t) = input.tokens.iter().find(|&&t| t >= config.vocab_size) {
        return Err(Error::invalid("encode", format!("token id {t} >= vocab size {}", config.vocab_size)));
    }
    if let Some(&p) = input.positions.iter().find(|&&p| p >= config.max_position) {
        return Err(Error::invalid("encode", format!("position id {p} >= max_position {}", config.max_position)));
    }
    let n = input.len();
    let (d, h) = (config.d, config.heads);
    let dh = d / h;
    let mask = input.mask.additive();

    let tok = g.param(params, "emb.tok")?;
    let pos = g.param(params, "emb.pos")?;
    let te = g.gather(tok, &input.tokens)?;
    let pe = g.gather(pos, &input.positions)?;
    let mut x = g.add(te, pe)?;

    for l in 0..config.layers {
        let p = |n: &str| format!("layer{l}.{n}");
        let g1 = g.param(params, &p("ln1.g"))?;
        let b1 = g.param(params, &p("ln1.b"))?;
        let hn = g.layer_norm(x, g1, b1, LAYER_NORM_EPS)?;
        let heads = |g: &mut Graph, w: &str| -> Result<Var> {
            let y = if w == "k" {
                let wk = g.param(params, &p("attn.wk"))?;
                g.matmul(hn, wk)?
            } else {
                linear(g, hn, params, &p(&format!("attn.w{w}")), &p(&format!("attn.b{w}")))?
            };
            let y = g.reshape(y, &[n, h, dh])?;
            g.permute(y, &[1, 0, 2])
        };
        let q = heads(g, "q")?;
        let k = heads(g, "k")?;
        let v = heads(g, "v")?;
        let kt = g.permute(k, &[0, 2, 1])?;
        let logits = g.bmm(q, kt)?;
        let logits = g.scale(logits, 1.0 / (dh as f64).sqrt());
        let att = g.softmax(logits, Some(&mask))?;
        let ctx = g.bmm(att, v)?;
        let ctx = g.permute(ctx, &[1, 0, 2])?;
        let ctx = g.reshape(ctx, &[n, d])?;
        let o = linear(g, ctx, params, &p("attn.wo"), &p("attn.bo"))?;
        x = g.add(x, o)?;
        check_finite(g, x, &format!("layer {l} attention"))?;

        let g2 = g.param(params, &p("ln2.g"))?;
        let b2 = g.param(params, &p("ln2.b"))?;
        let hn = g.layer_norm(x, g2, b2, LAYER_NORM_EPS)?;
        let f = linear(g, hn, params, &p("ffn.w1"), &p("ffn.b1"))?;
        let f = g.gelu(f);
        let f = linear(g, f, params, &p("ffn.w2"), &p("ffn.b2"))?;
        x = g.add(x, f)?;
        check_finite(g, x, &format!("layer {l} feed-forward"))?;
    }
    let fg = g.param(params, "final_ln.g")?;
    let fb = g.param(params, "final_ln.b")?;
    let x = g.layer_norm(x, fg, fb, LAYER_NORM_EPS)?;
    let text: Vec<usize> = input.text_range.clone().collect();
    let hs = g.gather(x, &input.schema_anchor)?;
    let hx = g.gather(x, &text)?;
    Ok(EncodedVars { hs, hx })
}

/// Forward pass without keeping the graph.
pub fn encode(input: &UnifiedInput, config: &EncoderConfig, params: &ParamStore) -> Result<Encodings> {
    let mut g = Graph::new();
    let e = encode_on(&mut g, input, config, params)?;
    Ok(Encodings { hs: g.value(e.hs).clone(), hx: g.value(e.hx).clone() })
}

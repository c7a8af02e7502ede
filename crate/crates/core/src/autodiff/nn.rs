//! Post-norm transformer encoder-decoder built from graph primitives.

use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{Init, Initializer, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Shape of an encoder-decoder network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    /// Width of one encoder input row.
    pub in_dim: usize,
    /// Width of one decoder query row. Ignored with `learned_query`.
    pub query_dim: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn: usize,
    pub out_dim: usize,
    /// Replace the decoder query with a single trained vector.
    #[serde(default)]
    pub learned_query: bool,
}

impl Arch {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            )));
        }
        if self.in_dim == 0 || self.out_dim == 0 || self.ffn == 0 {
            return Err(Error::Config("zero-width layer".into()));
        }
        if !self.learned_query && self.query_dim == 0 {
            return Err(Error::Config("query_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Sinusoidal position code for rows `start..start + n`.
pub fn positional_encoding(start: usize, n: usize, d: usize) -> Tensor {
    let mut data = Vec::with_capacity(n * d);
    for pos in start..start + n {
        for i in 0..d {
            let freq = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 / freq;
            data.push(if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Tensor::matrix(n, d, data).expect("positional encoding shape")
}

fn add_linear(init: &mut Initializer, name: &str, i: usize, o: usize) -> Result<()> {
    init.add(&format!("{name}.w"), i, o, Init::Glorot)?;
    init.add(&format!("{name}.b"), 1, o, Init::Zeros)?;
    Ok(())
}

fn add_norm(init: &mut Initializer, name: &str, d: usize) -> Result<()> {
    init.add(&format!("{name}.g"), 1, d, Init::Ones)?;
    init.add(&format!("{name}.b"), 1, d, Init::Zeros)?;
    Ok(())
}

/// Keys get no bias: softmax over the keys is invariant to it, so such a
/// parameter would never receive gradient.
fn add_attention(init: &mut Initializer, name: &str, d: usize) -> Result<()> {
    add_linear(init, &format!("{name}.q"), d, d)?;
    init.add(&format!("{name}.k.w"), d, d, Init::Glorot)?;
    add_linear(init, &format!("{name}.v"), d, d)?;
    add_linear(init, &format!("{name}.o"), d, d)?;
    Ok(())
}

/// Creates every parameter of `arch` with seeded Glorot weights, zero
/// biases and unit layer-norm gains.
pub fn init_params(arch: &Arch, seed: u64) -> Result<ParamStore> {
    arch.validate()?;
    let d = arch.d_model;
    let mut init = Initializer::new(seed);
    add_linear(&mut init, "in", arch.in_dim, d)?;
    if arch.learned_query {
        init.add("query.table", 1, d, Init::Glorot)?;
    } else {
        add_linear(&mut init, "query", arch.query_dim, d)?;
    }
    add_attention(&mut init, "enc.attn", d)?;
    add_norm(&mut init, "enc.ln1", d)?;
    add_linear(&mut init, "enc.ff1", d, arch.ffn)?;
    add_linear(&mut init, "enc.ff2", arch.ffn, d)?;
    add_norm(&mut init, "enc.ln2", d)?;
    add_attention(&mut init, "dec.self", d)?;
    add_norm(&mut init, "dec.ln1", d)?;
    add_attention(&mut init, "dec.cross", d)?;
    add_norm(&mut init, "dec.ln2", d)?;
    add_linear(&mut init, "dec.ff1", d, arch.ffn)?;
    add_linear(&mut init, "dec.ff2", arch.ffn, d)?;
    add_norm(&mut init, "dec.ln3", d)?;
    add_linear(&mut init, "out", d, arch.out_dim)?;
    Ok(init.finish())
}

/// Binds a [`ParamStore`] to a graph and looks parameters up by name.
pub struct Ctx<'g, 'p> {
    pub g: &'g mut Graph<'p>,
    pub store: &'p ParamStore,
}

impl<'g, 'p> Ctx<'g, 'p> {
    pub fn new(g: &'g mut Graph<'p>, store: &'p ParamStore) -> Self {
        Ctx { g, store }
    }

    pub fn p(&mut self, name: &str) -> Result<Var> {
        let id = self.store.id(name)?;
        Ok(self.g.param(self.store, id))
    }

    pub fn linear(&mut self, name: &str, x: Var) -> Result<Var> {
        let w = self.p(&format!("{name}.w"))?;
        let b = self.p(&format!("{name}.b"))?;
        let y = self.g.matmul(x, w)?;
        self.g.add_row(y, b)
    }

    pub fn norm(&mut self, name: &str, x: Var) -> Result<Var> {
        let g = self.p(&format!("{name}.g"))?;
        let b = self.p(&format!("{name}.b"))?;
        self.g.layer_norm(x, g, b, LAYER_NORM_EPS)
    }

    /// Multi-head scaled dot-product attention of `q_in` over `kv_in`.
    pub fn attention(&mut self, name: &str, q_in: Var, kv_in: Var, heads: usize) -> Result<Var> {
        let q = self.linear(&format!("{name}.q"), q_in)?;
        let kw = self.p(&format!("{name}.k.w"))?;
        let k = self.g.matmul(kv_in, kw)?;
        let v = self.linear(&format!("{name}.v"), kv_in)?;
        let d = self.g.value(q).cols();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (a, b) = (h * dh, (h + 1) * dh);
            let qh = self.g.slice_cols(q, a, b)?;
            let kh = self.g.slice_cols(k, a, b)?;
            let vh = self.g.slice_cols(v, a, b)?;
            let s = self.g.matmul_nt(qh, kh)?;
            let s = self.g.scale(s, scale);
            let w = self.g.softmax(s);
            outs.push(self.g.matmul(w, vh)?);
        }
        let cat = if heads == 1 {
            outs[0]
        } else {
            self.g.concat_cols(&outs)?
        };
        self.linear(&format!("{name}.o"), cat)
    }

    fn ffn(&mut self, name: &str, x: Var) -> Result<Var> {
        let h = self.linear(&format!("{name}.ff1"), x)?;
        let h = self.g.relu(h);
        self.linear(&format!("{name}.ff2"), h)
    }

    /// Encoder-decoder trunk. `input` is `n × in_dim`; `query` is
    /// `q × query_dim` unless the architecture learns its query, in which
    /// case it must be `None`. Returns the `q × d_model` decoder output.
    pub fn trunk(&mut self, arch: &Arch, input: Tensor, query: Option<Tensor>) -> Result<Var> {
        if input.cols() != arch.in_dim {
            return Err(Error::Dimension {
                op: "trunk input",
                left: input.shape().to_vec(),
                right: vec![arch.in_dim],
            });
        }
        let n = input.rows();
        let d = arch.d_model;
        let x = self.g.input(input);
        let x = self.linear("in", x)?;
        let pe = self.g.input(positional_encoding(0, n, d));
        let x = self.g.add(x, pe)?;

        let a = self.attention("enc.attn", x, x, arch.heads)?;
        let h = self.g.add(x, a)?;
        let h = self.norm("enc.ln1", h)?;
        let f = self.ffn("enc", h)?;
        let e = self.g.add(h, f)?;
        let memory = self.norm("enc.ln2", e)?;

        let q = match (arch.learned_query, query) {
            (true, None) => {
                let table = self.p("query.table")?;
                self.g.embedding(table, &[0])?
            }
            (false, Some(qt)) => {
                if qt.cols() != arch.query_dim {
                    return Err(Error::Dimension {
                        op: "trunk query",
                        left: qt.shape().to_vec(),
                        right: vec![arch.query_dim],
                    });
                }
                let qv = self.g.input(qt);
                self.linear("query", qv)?
            }
            (true, Some(_)) => return Err(Error::Config("learned query takes no query".into())),
            (false, None) => return Err(Error::Config("missing decoder query".into())),
        };
        let qn = self.g.value(q).rows();
        let pe = self.g.input(positional_encoding(n, qn, d));
        let q = self.g.add(q, pe)?;

        let s = self.attention("dec.self", q, q, arch.heads)?;
        let y = self.g.add(q, s)?;
        let y = self.norm("dec.ln1", y)?;
        let c = self.attention("dec.cross", y, memory, arch.heads)?;
        let y2 = self.g.add(y, c)?;
        let y2 = self.norm("dec.ln2", y2)?;
        let f = self.ffn("dec", y2)?;
        let y3 = self.g.add(y2, f)?;
        self.norm("dec.ln3", y3)
    }

    /// Trunk followed by the output projection.
    pub fn forward(&mut self, arch: &Arch, input: Tensor, query: Option<Tensor>) -> Result<Var> {
        let h = self.trunk(arch, input, query)?;
        self.linear("out", h)
    }
}

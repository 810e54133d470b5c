use crate::error::Result;
use crate::numerics::{Graph, Initializer, ParamStore, Real, Var};

/// Conditional residual MLP predicting the noise of a flattened action chunk.
///
/// Input is `[x_t | timestep embedding | condition]`; one input layer and
/// `blocks` pre-norm residual SiLU layers of width `hidden`, then a linear read-out.
#[derive(Clone, Debug, PartialEq)]
pub struct Denoiser {
    pub chunk_len: usize,
    pub cond_len: usize,
    pub time_dim: usize,
    pub hidden: usize,
    pub blocks: usize,
}

impl Denoiser {
    pub fn new(chunk_len: usize, cond_len: usize) -> Self {
        Self { chunk_len, cond_len, time_dim: 32, hidden: 1024, blocks: 3 }
    }

    pub fn input_len(&self) -> usize {
        self.chunk_len + self.time_dim + self.cond_len
    }

    pub fn init(&self, init: &mut Initializer) {
        init.linear("den.in", self.input_len(), self.hidden, 1.0);
        for i in 0..self.blocks {
            init.layer_norm(&format!("den.ln{i}"), self.hidden);
            init.linear(&format!("den.res{i}"), self.hidden, self.hidden, 0.5);
        }
        init.linear("den.out", self.hidden, self.chunk_len, 0.5);
    }

    /// `x_t[B,n]`, `temb[B,time_dim]`, `cond[B,c]` → `eps_hat[B,n]`.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, xt: Var, temb: Var, cond: Var) -> Result<Var> {
        let x = g.concat(&[xt, temb, cond])?;
        let (w, b) = (g.param(store, "den.in.w")?, g.param(store, "den.in.b")?);
        let h = g.linear(x, w, b)?;
        let mut h = g.silu(h);
        for i in 0..self.blocks {
            let gamma = g.param(store, &format!("den.ln{i}.g"))?;
            let beta = g.param(store, &format!("den.ln{i}.b"))?;
            let u = g.layer_norm(h, gamma, beta)?;
            let w = g.param(store, &format!("den.res{i}.w"))?;
            let b = g.param(store, &format!("den.res{i}.b"))?;
            let u = g.linear(u, w, b)?;
            let u = g.silu(u);
            h = g.add(h, u)?;
        }
        let (w, b) = (g.param(store, "den.out.w")?, g.param(store, "den.out.b")?);
        g.linear(h, w, b)
    }
}

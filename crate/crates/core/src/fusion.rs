//! Vision-led cross-attention fusion, the ablation fusion variants, and the
//! layout of the denoiser's condition vector.

use std::fmt;
use std::str::FromStr;

use crate::error::{shape_err, Error, Result};
use crate::numerics::{Graph, Initializer, ParamStore, Real, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    VisionOnly,
    NoDynamic,
    Concat,
    SelfAttn,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Full, Variant::VisionOnly, Variant::NoDynamic, Variant::Concat, Variant::SelfAttn];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::VisionOnly => "vision-only",
            Variant::NoDynamic => "no-dynamic",
            Variant::Concat => "concat",
            Variant::SelfAttn => "self-attn",
        }
    }

    pub fn uses_tactile(self) -> bool {
        self != Variant::VisionOnly
    }

    pub fn uses_dynamic(self) -> bool {
        !matches!(self, Variant::VisionOnly | Variant::NoDynamic)
    }

    pub fn uses_cross_attention(self) -> bool {
        matches!(self, Variant::Full | Variant::NoDynamic)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Fused representation `[B,2D]` plus attention weights `[B,3]` when the variant has them.
pub struct FusionOut {
    pub fused: Var,
    pub weights: Option<Var>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fusion {
    pub variant: Variant,
    pub dim: usize,
}

impl Fusion {
    pub fn new(variant: Variant, dim: usize) -> Self {
        Self { variant, dim }
    }

    pub fn init(&self, init: &mut Initializer) {
        let d = self.dim;
        match self.variant {
            Variant::Full | Variant::NoDynamic => {
                init.linear("fuse.q", d, d, 1.0);
                init.linear("fuse.k", d, d, 1.0);
            }
            Variant::Concat => init.linear("fuse.cat", 3 * d, 2 * d, 1.0),
            Variant::SelfAttn => {
                init.layer_norm("fuse.ln1", d);
                init.linear("fuse.attn_q", d, d, 1.0);
                init.linear("fuse.attn_k", d, d, 1.0);
                init.linear("fuse.attn_v", d, d, 1.0);
                init.linear("fuse.attn_o", d, d, 1.0);
                init.layer_norm("fuse.ln2", d);
                init.linear("fuse.mlp1", d, 2 * d, 1.0);
                init.linear("fuse.mlp2", 2 * d, d, 1.0);
                init.linear("fuse.out", d, 2 * d, 1.0);
            }
            Variant::VisionOnly => {}
        }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, fv: Var, fl: Var, fr: Var) -> Result<FusionOut> {
        let s = g.shape(fv).to_vec();
        if s.len() != 2 || s[1] != self.dim {
            return Err(shape_err("fusion input", &s, &[s[0], self.dim]));
        }
        for f in [fl, fr] {
            if g.shape(f) != s.as_slice() {
                return Err(shape_err("fusion input", &s, g.shape(f)));
            }
        }
        match self.variant {
            Variant::Full | Variant::NoDynamic => {
                let (f_att, w) = cross_attention(g, store, fv, fl, fr, "fuse.q", "fuse.k")?;
                Ok(FusionOut { fused: g.concat(&[fv, f_att])?, weights: Some(w) })
            }
            Variant::Concat => {
                let x = g.concat(&[fv, fl, fr])?;
                Ok(FusionOut { fused: linear(g, store, "fuse.cat", x)?, weights: None })
            }
            Variant::SelfAttn => Ok(FusionOut { fused: self_attention(g, store, fv, fl, fr, self.dim)?, weights: None }),
            Variant::VisionOnly => {
                let z = g.zeros(&s);
                Ok(FusionOut { fused: g.concat(&[fv, z])?, weights: None })
            }
        }
    }
}

fn linear<T: Real>(g: &mut Graph<T>, store: &ParamStore<T>, prefix: &str, x: Var) -> Result<Var> {
    let w = g.param(store, &format!("{prefix}.w"))?;
    let b = g.param(store, &format!("{prefix}.b"))?;
    g.linear(x, w, b)
}

fn layer_norm<T: Real>(g: &mut Graph<T>, store: &ParamStore<T>, prefix: &str, x: Var) -> Result<Var> {
    let gamma = g.param(store, &format!("{prefix}.g"))?;
    let beta = g.param(store, &format!("{prefix}.b"))?;
    g.layer_norm(x, gamma, beta)
}

/// `Σ_m softmax_m(q·k_m/√D)·values[m]` for a `[B,D]` query against three keys.
fn attend<T: Real>(g: &mut Graph<T>, q: Var, keys: &[Var; 3], values: &[Var; 3]) -> Result<(Var, Var)> {
    let d = g.shape(q)[1];
    let inv = T::from_f64(1.0 / (d as f64).sqrt());
    let mut logits = Vec::with_capacity(3);
    for k in keys {
        let dot = g.row_dot(q, *k)?;
        logits.push(g.scale(dot, inv));
    }
    let logits = g.concat(&logits)?;
    let w = g.softmax(logits);
    let mut acc: Option<Var> = None;
    for (m, v) in values.iter().enumerate() {
        let wm = g.slice(w, m, 1)?;
        let term = g.mul_col(*v, wm)?;
        acc = Some(match acc {
            None => term,
            Some(a) => g.add(a, term)?,
        });
    }
    Ok((acc.unwrap(), w))
}

/// Query from the visual feature, a shared key map over all three modalities,
/// raw features as values. Returns `(F_att, weights)`.
pub fn cross_attention<T: Real>(
    g: &mut Graph<T>,
    store: &ParamStore<T>,
    fv: Var,
    fl: Var,
    fr: Var,
    q_prefix: &str,
    k_prefix: &str,
) -> Result<(Var, Var)> {
    let q = linear(g, store, q_prefix, fv)?;
    let kv = linear(g, store, k_prefix, fv)?;
    let kl = linear(g, store, k_prefix, fl)?;
    let kr = linear(g, store, k_prefix, fr)?;
    attend(g, q, &[kv, kl, kr], &[fv, fl, fr])
}

/// One pre-norm encoder layer over the three modality tokens, mean-pooled and
/// projected to `2D`.
fn self_attention<T: Real>(g: &mut Graph<T>, store: &ParamStore<T>, fv: Var, fl: Var, fr: Var, d: usize) -> Result<Var> {
    let tokens = [fv, fl, fr];
    let mut q = Vec::new();
    let mut k = Vec::new();
    let mut v = Vec::new();
    for t in tokens {
        let h = layer_norm(g, store, "fuse.ln1", t)?;
        q.push(linear(g, store, "fuse.attn_q", h)?);
        k.push(linear(g, store, "fuse.attn_k", h)?);
        v.push(linear(g, store, "fuse.attn_v", h)?);
    }
    let (k, v) = ([k[0], k[1], k[2]], [v[0], v[1], v[2]]);
    let mut pooled: Option<Var> = None;
    for (m, t) in tokens.into_iter().enumerate() {
        let (a, _) = attend(g, q[m], &k, &v)?;
        let o = linear(g, store, "fuse.attn_o", a)?;
        let x = g.add(t, o)?;
        let h = layer_norm(g, store, "fuse.ln2", x)?;
        let h = linear(g, store, "fuse.mlp1", h)?;
        let h = g.silu(h);
        let h = linear(g, store, "fuse.mlp2", h)?;
        let y = g.add(x, h)?;
        pooled = Some(match pooled {
            None => y,
            Some(p) => g.add(p, y)?,
        });
    }
    let mean = g.scale(pooled.unwrap(), T::from_f64(1.0 / 3.0));
    debug_assert_eq!(g.shape(mean)[1], d);
    linear(g, store, "fuse.out", mean)
}

/// Fixed layout `[fused 2D | F_dyn | proprio window]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConditionLayout {
    pub dim: usize,
    pub dyn_len: usize,
    pub proprio_len: usize,
}

impl ConditionLayout {
    pub fn len(&self) -> usize {
        2 * self.dim + self.dyn_len + self.proprio_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenate on the tape; variants without dynamic features get a zero slot.
    pub fn assemble<T: Real>(&self, g: &mut Graph<T>, variant: Variant, fused: Var, fdyn: Var, proprio: Var) -> Result<Var> {
        let b = g.shape(fused)[0];
        self.check(&[g.shape(fused)[1], g.shape(fdyn)[1], g.shape(proprio)[1]])?;
        let fdyn = if variant.uses_dynamic() { fdyn } else { g.zeros(&[b, self.dyn_len]) };
        g.concat(&[fused, fdyn, proprio])
    }

    fn check(&self, lens: &[usize; 3]) -> Result<()> {
        let want = [2 * self.dim, self.dyn_len, self.proprio_len];
        if *lens != want {
            return Err(shape_err("assemble_condition", lens, &want));
        }
        Ok(())
    }
}

/// Plain-vector form of [`ConditionLayout::assemble`] for a single sample.
pub fn assemble_condition(layout: &ConditionLayout, variant: Variant, fused: &[f32], fdyn: &[f32], proprio: &[f32]) -> Result<Vec<f32>> {
    layout.check(&[fused.len(), fdyn.len(), proprio.len()])?;
    let mut out = Vec::with_capacity(layout.len());
    out.extend_from_slice(fused);
    if variant == Variant::VisionOnly {
        out[layout.dim..].iter_mut().for_each(|v| *v = 0.0);
    }
    if variant.uses_dynamic() {
        out.extend_from_slice(fdyn);
    } else {
        out.extend(std::iter::repeat(0.0).take(fdyn.len()));
    }
    out.extend_from_slice(proprio);
    Ok(out)
}

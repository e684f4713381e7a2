//! Global transformer branch: cube patchification, token embedding with a
//! learned positional table, the dual-layout (spatial/temporal) multi-head
//! self-attention, and the transformer block with its residual around the
//! normalized input.

use autograd::{attention, layer_norm, linear, Arr, Var};
use ndarray::IxDyn;

use crate::params::Bound;
use crate::VidError;

/// Slices a clip (B, C, T, H, W) into flattened cubes (B, P, C·pt·ph·pw),
/// patch index ordered time-major then row-major over space; cube contents
/// channel-major then (t, h, w).
pub fn cube_patchify(
    clip: &Arr,
    patch: (usize, usize, usize),
) -> Result<(Arr, (usize, usize, usize)), VidError> {
    let s = clip.shape();
    if s.len() != 5 {
        return Err(VidError::Shape(format!("expected rank-5 clip, got {s:?}")));
    }
    let (b, c, t, h, w) = (s[0], s[1], s[2], s[3], s[4]);
    let (pt, ph, pw) = patch;
    if pt == 0 || ph == 0 || pw == 0 || t % pt != 0 || h % ph != 0 || w % pw != 0 {
        return Err(VidError::Config(format!(
            "patch ({pt},{ph},{pw}) must divide clip dims ({t},{h},{w})"
        )));
    }
    let (nt, nh, nw) = (t / pt, h / ph, w / pw);
    let p = nt * nh * nw;
    let l = c * pt * ph * pw;
    let mut out = Arr::zeros(IxDyn(&[b, p, l]));
    for bi in 0..b {
        for it in 0..nt {
            for ih in 0..nh {
                for iw in 0..nw {
                    let pi = (it * nh + ih) * nw + iw;
                    let mut li = 0usize;
                    for ci in 0..c {
                        for dt in 0..pt {
                            for dh in 0..ph {
                                for dw in 0..pw {
                                    out[[bi, pi, li]] = clip[[
                                        bi,
                                        ci,
                                        it * pt + dt,
                                        ih * ph + dh,
                                        iw * pw + dw,
                                    ]];
                                    li += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((out, (nt, nh, nw)))
}

/// Exact inverse of [`cube_patchify`].
pub fn cube_unpatchify(
    cubes: &Arr,
    grid: (usize, usize, usize),
    patch: (usize, usize, usize),
    channels: usize,
) -> Arr {
    let s = cubes.shape();
    let (b, p, l) = (s[0], s[1], s[2]);
    let (nt, nh, nw) = grid;
    let (pt, ph, pw) = patch;
    assert_eq!(p, nt * nh * nw);
    assert_eq!(l, channels * pt * ph * pw);
    let mut out = Arr::zeros(IxDyn(&[b, channels, nt * pt, nh * ph, nw * pw]));
    for bi in 0..b {
        for it in 0..nt {
            for ih in 0..nh {
                for iw in 0..nw {
                    let pi = (it * nh + ih) * nw + iw;
                    let mut li = 0usize;
                    for ci in 0..channels {
                        for dt in 0..pt {
                            for dh in 0..ph {
                                for dw in 0..pw {
                                    out[[bi, ci, it * pt + dt, ih * ph + dh, iw * pw + dw]] =
                                        cubes[[bi, pi, li]];
                                    li += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Affine embedding of flattened cubes plus the learned positional table
/// (standard-normal initialized).
pub struct PatchEmbed {
    w: Var,
    b: Var,
    pos: Var,
}

impl PatchEmbed {
    pub fn bind(params: &Bound) -> PatchEmbed {
        PatchEmbed {
            w: params.take("embed.lin.w"),
            b: params.take("embed.lin.b"),
            pos: params.take("embed.pos"),
        }
    }

    pub fn forward(&self, cubes: &Var) -> Var {
        linear(cubes, &self.w, Some(&self.b)).add(&self.pos)
    }
}

/// Token layout changes between (B, P, D) and the two attention layouts.
/// Pure reshapes/permutations.
pub fn to_spatial(x: &Var, grid: (usize, usize, usize)) -> Var {
    let (b, p, d) = dims3(x);
    let (nt, nh, nw) = grid;
    assert_eq!(p, nt * nh * nw, "grid/token mismatch");
    x.reshape(&[b * nt, nh * nw, d])
}

pub fn from_spatial(x: &Var, batch: usize, grid: (usize, usize, usize)) -> Var {
    let (nt, nh, nw) = grid;
    x.reshape(&[batch, nt * nh * nw, x.shape()[2]])
}

pub fn to_temporal(x: &Var, grid: (usize, usize, usize)) -> Var {
    let (b, p, d) = dims3(x);
    let (nt, nh, nw) = grid;
    assert_eq!(p, nt * nh * nw, "grid/token mismatch");
    x.reshape(&[b, nt, nh * nw, d])
        .permute(&[0, 2, 1, 3])
        .reshape(&[b * nh * nw, nt, d])
}

pub fn from_temporal(x: &Var, batch: usize, grid: (usize, usize, usize)) -> Var {
    let (nt, nh, nw) = grid;
    let d = x.shape()[2];
    x.reshape(&[batch, nh * nw, nt, d])
        .permute(&[0, 2, 1, 3])
        .reshape(&[batch, nt * nh * nw, d])
}

/// Standard multi-head self-attention over the middle axis of (N, L, D).
pub struct Mhsa {
    q_w: Var,
    q_b: Var,
    k_w: Var,
    k_b: Var,
    v_w: Var,
    v_b: Var,
    o_w: Var,
    o_b: Var,
    pub heads: usize,
}

impl Mhsa {
    pub fn bind(params: &Bound, stage: usize, tag: &str, heads: usize) -> Mhsa {
        let g = |p: &str| format!("stage{stage}.{tag}.{p}");
        Mhsa {
            q_w: params.take(&g("q.w")),
            q_b: params.take(&g("q.b")),
            k_w: params.take(&g("k.w")),
            k_b: params.take(&g("k.b")),
            v_w: params.take(&g("v.w")),
            v_b: params.take(&g("v.b")),
            o_w: params.take(&g("o.w")),
            o_b: params.take(&g("o.b")),
            heads,
        }
    }

    pub fn forward(&self, x: &Var) -> Var {
        let (n, l, d) = dims3(x);
        let dh = d / self.heads;
        let split = |v: &Var| {
            v.reshape(&[n, l, self.heads, dh])
                .permute(&[0, 2, 1, 3])
                .reshape(&[n * self.heads, l, dh])
        };
        let q = split(&linear(x, &self.q_w, Some(&self.q_b)));
        let k = split(&linear(x, &self.k_w, Some(&self.k_b)));
        let v = split(&linear(x, &self.v_w, Some(&self.v_b)));
        let out = attention(&q, &k, &v, 1.0 / (dh as f64).sqrt());
        let merged = out
            .reshape(&[n, self.heads, l, dh])
            .permute(&[0, 2, 1, 3])
            .reshape(&[n, l, d]);
        linear(&merged, &self.o_w, Some(&self.o_b))
    }
}

/// The dual-layout attention stage: each branch normalizes its own layout,
/// attends, adds its residual, and the two branch outputs (mapped back to
/// token layout) are summed.
pub struct StMhsa {
    ln_s_gamma: Var,
    ln_s_beta: Var,
    ln_t_gamma: Var,
    ln_t_beta: Var,
    pub spatial: Mhsa,
    pub temporal: Mhsa,
    pub drop_spatial: bool,
    pub drop_temporal: bool,
}

impl StMhsa {
    pub fn bind(params: &Bound, stage: usize, heads: usize, drop_spatial: bool, drop_temporal: bool) -> Self {
        StMhsa {
            ln_s_gamma: params.take(&format!("stage{stage}.ln_s.gamma")),
            ln_s_beta: params.take(&format!("stage{stage}.ln_s.beta")),
            ln_t_gamma: params.take(&format!("stage{stage}.ln_t.gamma")),
            ln_t_beta: params.take(&format!("stage{stage}.ln_t.beta")),
            spatial: Mhsa::bind(params, stage, "s_mhsa", heads),
            temporal: Mhsa::bind(params, stage, "t_mhsa", heads),
            drop_spatial,
            drop_temporal,
        }
    }

    /// `x` is the previous stage's tokens, `x_ct` the conv→transformer
    /// injection for this stage (None when the bridge is off).
    pub fn forward(&self, x: &Var, x_ct: Option<&Var>, grid: (usize, usize, usize)) -> Var {
        let (b, _, _) = dims3(x);
        let s = match x_ct {
            Some(ct) => x.add(ct),
            None => x.clone(),
        };
        let mut branches: Vec<Var> = Vec::new();
        if !self.drop_spatial {
            let xs = to_spatial(&s, grid);
            let attended = self
                .spatial
                .forward(&layer_norm(&xs, &self.ln_s_gamma, &self.ln_s_beta))
                .add(&xs);
            branches.push(from_spatial(&attended, b, grid));
        }
        if !self.drop_temporal {
            let xt = to_temporal(&s, grid);
            let attended = self
                .temporal
                .forward(&layer_norm(&xt, &self.ln_t_gamma, &self.ln_t_beta))
                .add(&xt);
            branches.push(from_temporal(&attended, b, grid));
        }
        match branches.len() {
            0 => s, // both attention branches removed: pass-through
            1 => branches.pop().unwrap(),
            _ => branches[0].add(&branches[1]),
        }
    }
}

/// Transformer tail: `FFN(LN(x)) + LN(x)` — the residual wraps the
/// normalized input, not the raw input.
pub struct TransformerBlock {
    ln_gamma: Var,
    ln_beta: Var,
    l1_w: Var,
    l1_b: Var,
    l2_w: Var,
    l2_b: Var,
}

impl TransformerBlock {
    pub fn bind(params: &Bound, stage: usize) -> Self {
        TransformerBlock {
            ln_gamma: params.take(&format!("stage{stage}.ln_ffn.gamma")),
            ln_beta: params.take(&format!("stage{stage}.ln_ffn.beta")),
            l1_w: params.take(&format!("stage{stage}.ffn.l1.w")),
            l1_b: params.take(&format!("stage{stage}.ffn.l1.b")),
            l2_w: params.take(&format!("stage{stage}.ffn.l2.w")),
            l2_b: params.take(&format!("stage{stage}.ffn.l2.b")),
        }
    }

    pub fn forward(&self, x_mt: &Var) -> Var {
        let normed = layer_norm(x_mt, &self.ln_gamma, &self.ln_beta);
        let ffn = linear(
            &linear(&normed, &self.l1_w, Some(&self.l1_b)).gelu(),
            &self.l2_w,
            Some(&self.l2_b),
        );
        ffn.add(&normed)
    }
}

pub(crate) fn dims3(v: &Var) -> (usize, usize, usize) {
    let s = v.shape();
    assert_eq!(s.len(), 3, "expected rank-3 tensor, got {s:?}");
    (s[0], s[1], s[2])
}

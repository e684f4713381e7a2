//! Reference implementations of the attention formulas as plain nested
//! loops over `ndarray` values. These share no code with the autodiff path
//! and exist purely to cross-check it in tests and the acceptance suite.

use autograd::Arr;
use ndarray::IxDyn;

pub const LN_EPS: f64 = 1e-5;

fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn softmax_inplace(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Kernel-1 3-D convolution: w (Co, Ci, 1, 1, 1), bias (Co).
fn conv1x1(x: &Arr, w: &Arr, b: &Arr) -> Arr {
    let s = x.shape().to_vec();
    let co = w.shape()[0];
    let mut out = Arr::zeros(IxDyn(&[s[0], co, s[2], s[3], s[4]]));
    for bi in 0..s[0] {
        for o in 0..co {
            for t in 0..s[2] {
                for h in 0..s[3] {
                    for wi in 0..s[4] {
                        let mut acc = b[[o]];
                        for ci in 0..s[1] {
                            acc += w[[o, ci, 0, 0, 0]] * x[[bi, ci, t, h, wi]];
                        }
                        out[[bi, o, t, h, wi]] = acc;
                    }
                }
            }
        }
    }
    out
}

/// The convolution-branch attention map: pool over time (spatial) or space
/// (temporal), project with ς1/ς2, multi-head softmax((ς1ᵀς2)/√C)·ς1.
pub fn conv_attention(
    x: &Arr,
    w1: &Arr,
    b1: &Arr,
    w2: &Arr,
    b2: &Arr,
    heads: usize,
    spatial: bool,
) -> Arr {
    let s = x.shape().to_vec();
    let (b, c, t, h, w) = (s[0], s[1], s[2], s[3], s[4]);
    // Adaptive pooling to (1,H,W) or (T,1,1).
    let pooled = if spatial {
        let mut p = Arr::zeros(IxDyn(&[b, c, 1, h, w]));
        for bi in 0..b {
            for ci in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        let mut acc = 0.0;
                        for ti in 0..t {
                            acc += x[[bi, ci, ti, hi, wi]];
                        }
                        p[[bi, ci, 0, hi, wi]] = acc / t as f64;
                    }
                }
            }
        }
        p
    } else {
        let mut p = Arr::zeros(IxDyn(&[b, c, t, 1, 1]));
        for bi in 0..b {
            for ci in 0..c {
                for ti in 0..t {
                    let mut acc = 0.0;
                    for hi in 0..h {
                        for wi in 0..w {
                            acc += x[[bi, ci, ti, hi, wi]];
                        }
                    }
                    p[[bi, ci, ti, 0, 0]] = acc / (h * w) as f64;
                }
            }
        }
        p
    };
    let q = conv1x1(&pooled, w1, b1);
    let k = conv1x1(&pooled, w2, b2);

    // Flatten positions.
    let len = if spatial { h * w } else { t };
    let at = |m: &Arr, bi: usize, ci: usize, pos: usize| -> f64 {
        if spatial {
            m[[bi, ci, 0, pos / w, pos % w]]
        } else {
            m[[bi, ci, pos, 0, 0]]
        }
    };
    let dh = c / heads;
    let scale = 1.0 / (c as f64).sqrt();
    let mut out = Arr::zeros(pooled.raw_dim());
    for bi in 0..b {
        for head in 0..heads {
            let c0 = head * dh;
            for i in 0..len {
                let mut row = vec![0.0f64; len];
                for (j, rv) in row.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for cj in c0..c0 + dh {
                        acc += at(&q, bi, cj, i) * at(&k, bi, cj, j);
                    }
                    *rv = acc * scale;
                }
                softmax_inplace(&mut row);
                for cj in c0..c0 + dh {
                    let mut acc = 0.0;
                    for (j, p) in row.iter().enumerate() {
                        acc += p * at(&q, bi, cj, j);
                    }
                    if spatial {
                        out[[bi, cj, 0, i / w, i % w]] = acc;
                    } else {
                        out[[bi, cj, i, 0, 0]] = acc;
                    }
                }
            }
        }
    }
    out
}

/// Row-wise layer normalization over the last axis of (N, L, D).
pub fn layer_norm3(x: &Arr, gamma: &Arr, beta: &Arr) -> Arr {
    let s = x.shape().to_vec();
    let (n, l, d) = (s[0], s[1], s[2]);
    let mut out = Arr::zeros(IxDyn(&s));
    for ni in 0..n {
        for li in 0..l {
            let mut mean = 0.0;
            for di in 0..d {
                mean += x[[ni, li, di]];
            }
            mean /= d as f64;
            let mut var = 0.0;
            for di in 0..d {
                let dv = x[[ni, li, di]] - mean;
                var += dv * dv;
            }
            var /= d as f64;
            let istd = 1.0 / (var + LN_EPS).sqrt();
            for di in 0..d {
                out[[ni, li, di]] =
                    (x[[ni, li, di]] - mean) * istd * gamma[[di]] + beta[[di]];
            }
        }
    }
    out
}

fn affine3(x: &Arr, w: &Arr, b: &Arr) -> Arr {
    let s = x.shape().to_vec();
    let (n, l, din) = (s[0], s[1], s[2]);
    let dout = w.shape()[1];
    let mut out = Arr::zeros(IxDyn(&[n, l, dout]));
    for ni in 0..n {
        for li in 0..l {
            for o in 0..dout {
                let mut acc = b[[o]];
                for i in 0..din {
                    acc += x[[ni, li, i]] * w[[i, o]];
                }
                out[[ni, li, o]] = acc;
            }
        }
    }
    out
}

pub struct MhsaWeights<'a> {
    pub q_w: &'a Arr,
    pub q_b: &'a Arr,
    pub k_w: &'a Arr,
    pub k_b: &'a Arr,
    pub v_w: &'a Arr,
    pub v_b: &'a Arr,
    pub o_w: &'a Arr,
    pub o_b: &'a Arr,
}

/// Standard multi-head self-attention over (N, L, D) by loops.
pub fn mhsa(x: &Arr, w: &MhsaWeights, heads: usize) -> Arr {
    let s = x.shape().to_vec();
    let (n, l, d) = (s[0], s[1], s[2]);
    let q = affine3(x, w.q_w, w.q_b);
    let k = affine3(x, w.k_w, w.k_b);
    let v = affine3(x, w.v_w, w.v_b);
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut mixed = Arr::zeros(IxDyn(&[n, l, d]));
    for ni in 0..n {
        for head in 0..heads {
            let c0 = head * dh;
            for i in 0..l {
                let mut row = vec![0.0f64; l];
                for (j, rv) in row.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for c in c0..c0 + dh {
                        acc += q[[ni, i, c]] * k[[ni, j, c]];
                    }
                    *rv = acc * scale;
                }
                softmax_inplace(&mut row);
                for c in c0..c0 + dh {
                    let mut acc = 0.0;
                    for (j, p) in row.iter().enumerate() {
                        acc += p * v[[ni, j, c]];
                    }
                    mixed[[ni, i, c]] = acc;
                }
            }
        }
    }
    affine3(&mixed, w.o_w, w.o_b)
}

pub struct StMhsaWeights<'a> {
    pub ln_s_gamma: &'a Arr,
    pub ln_s_beta: &'a Arr,
    pub ln_t_gamma: &'a Arr,
    pub ln_t_beta: &'a Arr,
    pub spatial: MhsaWeights<'a>,
    pub temporal: MhsaWeights<'a>,
}

/// The dual-layout token attention, evaluated literally: rearrange into the
/// spatial and temporal layouts, run LN + MHSA + residual in each, map both
/// back to token layout and sum.
pub fn st_mhsa(
    x: &Arr,
    x_ct: Option<&Arr>,
    grid: (usize, usize, usize),
    w: &StMhsaWeights,
    heads: usize,
) -> Arr {
    let s = x.shape().to_vec();
    let (b, p, d) = (s[0], s[1], s[2]);
    let (nt, nh, nw) = grid;
    assert_eq!(p, nt * nh * nw);
    let mut summed = x.clone();
    if let Some(ct) = x_ct {
        summed += ct;
    }

    // Spatial layout (B·nt, nh·nw, D).
    let mut xs = Arr::zeros(IxDyn(&[b * nt, nh * nw, d]));
    for bi in 0..b {
        for it in 0..nt {
            for sp in 0..nh * nw {
                for di in 0..d {
                    xs[[bi * nt + it, sp, di]] = summed[[bi, it * (nh * nw) + sp, di]];
                }
            }
        }
    }
    let ms = mhsa(&layer_norm3(&xs, w.ln_s_gamma, w.ln_s_beta), &w.spatial, heads);
    let mut branch_s = Arr::zeros(IxDyn(&[b, p, d]));
    for bi in 0..b {
        for it in 0..nt {
            for sp in 0..nh * nw {
                for di in 0..d {
                    branch_s[[bi, it * (nh * nw) + sp, di]] =
                        ms[[bi * nt + it, sp, di]] + xs[[bi * nt + it, sp, di]];
                }
            }
        }
    }

    // Temporal layout (B·nh·nw, nt, D).
    let mut xt = Arr::zeros(IxDyn(&[b * nh * nw, nt, d]));
    for bi in 0..b {
        for it in 0..nt {
            for sp in 0..nh * nw {
                for di in 0..d {
                    xt[[bi * (nh * nw) + sp, it, di]] = summed[[bi, it * (nh * nw) + sp, di]];
                }
            }
        }
    }
    let mt = mhsa(&layer_norm3(&xt, w.ln_t_gamma, w.ln_t_beta), &w.temporal, heads);
    let mut out = branch_s;
    for bi in 0..b {
        for it in 0..nt {
            for sp in 0..nh * nw {
                for di in 0..d {
                    out[[bi, it * (nh * nw) + sp, di]] +=
                        mt[[bi * (nh * nw) + sp, it, di]] + xt[[bi * (nh * nw) + sp, it, di]];
                }
            }
        }
    }
    out
}

/// Elementwise sigmoid-gated weighting with explicit broadcasting loops.
pub fn ga_weight(x: &Arr, s_map: &Arr, t_map: &Arr) -> Arr {
    let sh = x.shape().to_vec();
    let mut out = Arr::zeros(IxDyn(&sh));
    for b in 0..sh[0] {
        for c in 0..sh[1] {
            for t in 0..sh[2] {
                for h in 0..sh[3] {
                    for w in 0..sh[4] {
                        let gate = s_map[[b, c, 0, h, w]] + t_map[[b, c, t, 0, 0]];
                        let sig = 1.0 / (1.0 + (-gate).exp());
                        out[[b, c, t, h, w]] = sig * x[[b, c, t, h, w]];
                    }
                }
            }
        }
    }
    out
}

/// Block-mean pooling of (B, C, T, H, W) onto an exactly dividing grid.
pub fn block_mean_pool(x: &Arr, grid: (usize, usize, usize)) -> Arr {
    let s = x.shape().to_vec();
    let (b, c, t, h, w) = (s[0], s[1], s[2], s[3], s[4]);
    let (nt, nh, nw) = grid;
    assert!(t % nt == 0 && h % nh == 0 && w % nw == 0);
    let (bt, bh, bw) = (t / nt, h / nh, w / nw);
    let mut out = Arr::zeros(IxDyn(&[b, c, nt, nh, nw]));
    for bi in 0..b {
        for ci in 0..c {
            for it in 0..nt {
                for ih in 0..nh {
                    for iw in 0..nw {
                        let mut acc = 0.0;
                        for dt in 0..bt {
                            for dh2 in 0..bh {
                                for dw in 0..bw {
                                    acc += x[[
                                        bi,
                                        ci,
                                        it * bt + dt,
                                        ih * bh + dh2,
                                        iw * bw + dw,
                                    ]];
                                }
                            }
                        }
                        out[[bi, ci, it, ih, iw]] = acc / (bt * bh * bw) as f64;
                    }
                }
            }
        }
    }
    out
}

/// Conv-head reduction: kernel-1 channel combination then spatial mean.
pub fn conv_head(x: &Arr, w: &Arr, bias: f64) -> Arr {
    let s = x.shape().to_vec();
    let (b, c, t, h, wd) = (s[0], s[1], s[2], s[3], s[4]);
    let mut out = Arr::zeros(IxDyn(&[b, t]));
    for bi in 0..b {
        for ti in 0..t {
            let mut acc = 0.0;
            for hi in 0..h {
                for wi in 0..wd {
                    let mut ch = bias;
                    for ci in 0..c {
                        ch += w[[0, ci, 0, 0, 0]] * x[[bi, ci, ti, hi, wi]];
                    }
                    acc += ch;
                }
            }
            out[[bi, ti]] = acc / (h * wd) as f64;
        }
    }
    out
}

/// Transformer tail evaluated directly: FFN(LN(x)) + LN(x).
pub struct FfnWeights<'a> {
    pub ln_gamma: &'a Arr,
    pub ln_beta: &'a Arr,
    pub l1_w: &'a Arr,
    pub l1_b: &'a Arr,
    pub l2_w: &'a Arr,
    pub l2_b: &'a Arr,
}

pub fn transformer_block(x: &Arr, w: &FfnWeights) -> Arr {
    let normed = layer_norm3(x, w.ln_gamma, w.ln_beta);
    let mut hidden = affine3(&normed, w.l1_w, w.l1_b);
    hidden.mapv_inplace(gelu);
    let ffn = affine3(&hidden, w.l2_w, w.l2_b);
    &ffn + &normed
}

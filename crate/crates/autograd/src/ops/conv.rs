//! 3-D convolution (stride 1, symmetric zero padding) via chunked im2col and
//! dense GEMM. The chunking keeps the column buffer bounded; chunks run in
//! parallel and are written to disjoint output slabs, so the result does not
//! depend on scheduling.

use ndarray::{s, Array2, ArrayView4, Axis, IxDyn};
use rayon::prelude::*;

use crate::graph::make_op;
use crate::{Arr, Var};

/// Target column-buffer size per chunk, in elements.
const COL_BUDGET: usize = 4_000_000;

#[derive(Clone, Copy)]
struct ConvDims {
    b: usize,
    ci: usize,
    t: usize,
    h: usize,
    w: usize,
    co: usize,
    kt: usize,
    kh: usize,
    kw: usize,
    pt: usize,
    ph: usize,
    pw: usize,
    ot: usize,
    oh: usize,
    ow: usize,
}

fn dims(x: &Arr, w: &Arr, pad: (usize, usize, usize)) -> ConvDims {
    let xs = x.shape();
    let ws = w.shape();
    assert_eq!(xs.len(), 5, "conv3d input must be rank 5 (B,C,T,H,W)");
    assert_eq!(ws.len(), 5, "conv3d weight must be rank 5 (Co,Ci,kt,kh,kw)");
    assert_eq!(xs[1], ws[1], "conv3d channel mismatch");
    let (pt, ph, pw) = pad;
    let (kt, kh, kw) = (ws[2], ws[3], ws[4]);
    assert!(pt < kt.max(1) && ph < kh.max(1) && pw < kw.max(1), "pad must be < kernel");
    let d = ConvDims {
        b: xs[0],
        ci: xs[1],
        t: xs[2],
        h: xs[3],
        w: xs[4],
        co: ws[0],
        kt,
        kh,
        kw,
        pt,
        ph,
        pw,
        ot: xs[2] + 2 * pt + 1 - kt,
        oh: xs[3] + 2 * ph + 1 - kh,
        ow: xs[4] + 2 * pw + 1 - kw,
    };
    assert!(d.ot >= 1 && d.oh >= 1 && d.ow >= 1, "conv3d output would be empty");
    d
}

/// Gathers input patches for output frames `t0..t1` of one batch element into
/// a `(Ci*kt*kh*kw, (t1-t0)*oh*ow)` column matrix. Inner copies are raw
/// `memcpy`-style row segments.
fn im2col(xb: &ArrayView4<f64>, d: &ConvDims, t0: usize, t1: usize) -> Array2<f64> {
    let k = d.ci * d.kt * d.kh * d.kw;
    let frames = t1 - t0;
    let cols = frames * d.oh * d.ow;
    let xs = xb.as_slice().expect("conv input must be standard layout");
    let (st_c, st_t, st_h) = (d.t * d.h * d.w, d.h * d.w, d.w);
    let mut col = vec![0.0f64; k * cols];
    for ci in 0..d.ci {
        for kt_i in 0..d.kt {
            for kh_i in 0..d.kh {
                for kw_i in 0..d.kw {
                    let r = ((ci * d.kt + kt_i) * d.kh + kh_i) * d.kw + kw_i;
                    let row = &mut col[r * cols..(r + 1) * cols];
                    // Valid output-column range along W for this kernel tap.
                    let wo_lo = d.pw.saturating_sub(kw_i);
                    let wo_hi = (d.w + d.pw - kw_i).min(d.ow);
                    if wo_lo >= wo_hi {
                        continue;
                    }
                    let src_w0 = wo_lo + kw_i - d.pw;
                    let len = wo_hi - wo_lo;
                    for (fi, to) in (t0..t1).enumerate() {
                        let ti = (to + kt_i) as isize - d.pt as isize;
                        if ti < 0 || ti >= d.t as isize {
                            continue;
                        }
                        let x_base = ci * st_c + ti as usize * st_t;
                        for ho in 0..d.oh {
                            let hi = (ho + kh_i) as isize - d.ph as isize;
                            if hi < 0 || hi >= d.h as isize {
                                continue;
                            }
                            let src0 = x_base + hi as usize * st_h + src_w0;
                            let dst0 = (fi * d.oh + ho) * d.ow + wo_lo;
                            row[dst0..dst0 + len].copy_from_slice(&xs[src0..src0 + len]);
                        }
                    }
                }
            }
        }
    }
    Array2::from_shape_vec((k, cols), col).unwrap()
}

fn chunk_plan(d: &ConvDims) -> Vec<(usize, usize, usize)> {
    let k = d.ci * d.kt * d.kh * d.kw;
    let per_frame = k * d.oh * d.ow;
    let frames = (COL_BUDGET / per_frame.max(1)).clamp(1, d.ot);
    let mut plan = Vec::new();
    for b in 0..d.b {
        let mut t0 = 0;
        while t0 < d.ot {
            let t1 = (t0 + frames).min(d.ot);
            plan.push((b, t0, t1));
            t0 = t1;
        }
    }
    plan
}

fn is_pointwise(d: &ConvDims) -> bool {
    d.kt == 1 && d.kh == 1 && d.kw == 1 && d.pt == 0 && d.ph == 0 && d.pw == 0
}

/// Plain forward convolution on raw arrays.
pub fn conv3d_raw(x: &Arr, w: &Arr, bias: Option<&Arr>, pad: (usize, usize, usize)) -> Arr {
    let d = dims(x, w, pad);
    let k = d.ci * d.kt * d.kh * d.kw;
    let w2 = w.to_shape((d.co, k)).unwrap().to_owned();
    let x5 = x.view().into_dimensionality::<ndarray::Ix5>().unwrap();

    if is_pointwise(&d) {
        // Kernel-1: the column matrix is the input itself.
        let n = d.t * d.h * d.w;
        let pieces: Vec<(usize, Array2<f64>)> = (0..d.b)
            .into_par_iter()
            .map(|b| {
                let xb = x5
                    .index_axis(Axis(0), b)
                    .into_shape_with_order((d.ci, n))
                    .unwrap();
                let mut out2 = w2.dot(&xb);
                if let Some(bias) = bias {
                    for (i, mut row) in out2.rows_mut().into_iter().enumerate() {
                        row += bias[[i]];
                    }
                }
                (b, out2)
            })
            .collect();
        let mut out = Arr::zeros(IxDyn(&[d.b, d.co, d.ot, d.oh, d.ow]));
        for (b, piece) in pieces {
            let shaped = piece.into_shape_with_order((d.co, d.ot, d.oh, d.ow)).unwrap();
            out.slice_mut(s![b, .., .., .., ..]).assign(&shaped);
        }
        return out;
    }

    let plan = chunk_plan(&d);
    let pieces: Vec<(usize, usize, usize, Array2<f64>)> = plan
        .par_iter()
        .map(|&(b, t0, t1)| {
            let xb = x5.index_axis(Axis(0), b);
            let col = im2col(&xb, &d, t0, t1);
            let mut out2 = w2.dot(&col);
            if let Some(bias) = bias {
                for (i, mut row) in out2.rows_mut().into_iter().enumerate() {
                    row += bias[[i]];
                }
            }
            (b, t0, t1, out2)
        })
        .collect();

    let mut out = Arr::zeros(IxDyn(&[d.b, d.co, d.ot, d.oh, d.ow]));
    for (b, t0, t1, piece) in pieces {
        let shaped = piece
            .to_shape((d.co, t1 - t0, d.oh, d.ow))
            .unwrap()
            .to_owned();
        out.slice_mut(s![b, .., t0..t1, .., ..]).assign(&shaped);
    }
    out
}

/// Weight gradient: sum over chunks of dOut · colᵀ, reduced in plan order.
fn conv3d_grad_w(x: &Arr, g: &Arr, d: &ConvDims) -> Arr {
    let k = d.ci * d.kt * d.kh * d.kw;
    let x5 = x.view().into_dimensionality::<ndarray::Ix5>().unwrap();
    let g5 = g.view().into_dimensionality::<ndarray::Ix5>().unwrap();

    if is_pointwise(d) {
        let n = d.t * d.h * d.w;
        let partials: Vec<Array2<f64>> = (0..d.b)
            .into_par_iter()
            .map(|b| {
                let xb = x5
                    .index_axis(Axis(0), b)
                    .into_shape_with_order((d.ci, n))
                    .unwrap();
                let gb = g5
                    .index_axis(Axis(0), b)
                    .into_shape_with_order((d.co, n))
                    .unwrap();
                gb.dot(&xb.t())
            })
            .collect();
        let mut dw2 = Array2::<f64>::zeros((d.co, d.ci));
        for p in partials {
            dw2 += &p;
        }
        return dw2
            .into_shape_with_order(IxDyn(&[d.co, d.ci, 1, 1, 1]))
            .unwrap();
    }

    let plan = chunk_plan(d);
    let partials: Vec<Array2<f64>> = plan
        .par_iter()
        .map(|&(b, t0, t1)| {
            let xb = x5.index_axis(Axis(0), b);
            let col = im2col(&xb, d, t0, t1);
            let gb = g5
                .slice(s![b, .., t0..t1, .., ..])
                .to_shape((d.co, (t1 - t0) * d.oh * d.ow))
                .unwrap()
                .to_owned();
            gb.dot(&col.t())
        })
        .collect();
    let mut dw2 = Array2::<f64>::zeros((d.co, k));
    for p in partials {
        dw2 += &p;
    }
    dw2.into_shape_with_order(IxDyn(&[d.co, d.ci, d.kt, d.kh, d.kw]))
        .unwrap()
}

/// Input gradient as a convolution of the output gradient with the
/// channel-swapped, spatially flipped kernel (valid because stride is 1).
fn conv3d_grad_x(g: &Arr, w: &Arr, d: &ConvDims) -> Arr {
    let mut wf = Arr::zeros(IxDyn(&[d.ci, d.co, d.kt, d.kh, d.kw]));
    let w5 = w.view().into_dimensionality::<ndarray::Ix5>().unwrap();
    for co in 0..d.co {
        for ci in 0..d.ci {
            for i in 0..d.kt {
                for j in 0..d.kh {
                    for l in 0..d.kw {
                        wf[[ci, co, d.kt - 1 - i, d.kh - 1 - j, d.kw - 1 - l]] =
                            w5[[co, ci, i, j, l]];
                    }
                }
            }
        }
    }
    let back_pad = (d.kt - 1 - d.pt, d.kh - 1 - d.ph, d.kw - 1 - d.pw);
    conv3d_raw(g, &wf, None, back_pad)
}

/// Differentiable 3-D convolution, stride 1.
pub fn conv3d(x: &Var, w: &Var, bias: Option<&Var>, pad: (usize, usize, usize)) -> Var {
    let d = dims(x.value(), w.value(), pad);
    let out = conv3d_raw(x.value(), w.value(), bias.map(|b| b.value()), pad);
    let xs = x.shared_value();
    let ws = w.shared_value();
    let has_bias = bias.is_some();
    let zero = Var::constant(Arr::zeros(IxDyn(&[1])));
    let bref: &Var = bias.unwrap_or(&zero);
    make_op(&[x, w, bref], out, move |g| {
        let dx = conv3d_grad_x(g, &ws, &d);
        let dw = conv3d_grad_w(&xs, g, &d);
        let db = if has_bias {
            let mut db = Arr::zeros(IxDyn(&[d.co]));
            let g5 = g.view().into_dimensionality::<ndarray::Ix5>().unwrap();
            for co in 0..d.co {
                db[[co]] = g5.index_axis(Axis(1), co).sum();
            }
            Some(db)
        } else {
            None
        };
        vec![Some(dx), Some(dw), db]
    })
}

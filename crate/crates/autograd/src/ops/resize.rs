//! Trilinear upsampling of rank-5 tensors over (T, H, W), half-pixel centers
//! (align_corners = false).

use ndarray::{Axis, IxDyn, Zip};

use crate::graph::make_op;
use crate::{Arr, Var};

/// Per-output-index source pair (i0, i1) and interpolation weight for i1.
fn axis_table(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    (0..n_out)
        .map(|i| {
            if n_in == 1 {
                return (0, 0, 0.0);
            }
            let src = (i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
            let src = src.clamp(0.0, (n_in - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

pub fn upsample_trilinear(x: &Var, out_sz: (usize, usize, usize)) -> Var {
    let xs = x.shape().to_vec();
    assert_eq!(xs.len(), 5, "upsample_trilinear expects rank 5");
    let (b, c, t, h, w) = (xs[0], xs[1], xs[2], xs[3], xs[4]);
    let (ot, oh, ow) = out_sz;
    let tt = axis_table(t, ot);
    let th = axis_table(h, oh);
    let tw = axis_table(w, ow);

    let xv = x
        .value()
        .view()
        .into_shape_with_order((b * c, t, h, w))
        .unwrap();
    let mut out = Arr::zeros(IxDyn(&[b, c, ot, oh, ow]));
    {
        let mut ov = out.view_mut().into_shape_with_order((b * c, ot, oh, ow)).unwrap();
        let (tt, th, tw) = (&tt, &th, &tw);
        Zip::from(ov.axis_iter_mut(Axis(0)))
            .and(xv.axis_iter(Axis(0)))
            .par_for_each(|mut o, xi| {
                for (i, &(t0, t1, ft)) in tt.iter().enumerate() {
                    for (j, &(h0, h1, fh)) in th.iter().enumerate() {
                        for (l, &(w0, w1, fw)) in tw.iter().enumerate() {
                            let c00 = xi[[t0, h0, w0]] * (1.0 - fw) + xi[[t0, h0, w1]] * fw;
                            let c01 = xi[[t0, h1, w0]] * (1.0 - fw) + xi[[t0, h1, w1]] * fw;
                            let c10 = xi[[t1, h0, w0]] * (1.0 - fw) + xi[[t1, h0, w1]] * fw;
                            let c11 = xi[[t1, h1, w0]] * (1.0 - fw) + xi[[t1, h1, w1]] * fw;
                            let c0 = c00 * (1.0 - fh) + c01 * fh;
                            let c1 = c10 * (1.0 - fh) + c11 * fh;
                            o[[i, j, l]] = c0 * (1.0 - ft) + c1 * ft;
                        }
                    }
                }
            });
    }

    let in_shape = xs.clone();
    make_op(&[x], out, move |g| {
        let (b, c) = (in_shape[0], in_shape[1]);
        let (t, h, w) = (in_shape[2], in_shape[3], in_shape[4]);
        let tt = axis_table(t, ot);
        let th = axis_table(h, oh);
        let tw = axis_table(w, ow);
        let gv = g.view().into_shape_with_order((b * c, ot, oh, ow)).unwrap();
        let mut dx = Arr::zeros(IxDyn(&in_shape));
        {
            let mut dv = dx.view_mut().into_shape_with_order((b * c, t, h, w)).unwrap();
            let (tt, th, tw) = (&tt, &th, &tw);
            Zip::from(dv.axis_iter_mut(Axis(0)))
                .and(gv.axis_iter(Axis(0)))
                .par_for_each(|mut d, gi| {
                    for (i, &(t0, t1, ft)) in tt.iter().enumerate() {
                        for (j, &(h0, h1, fh)) in th.iter().enumerate() {
                            for (l, &(w0, w1, fw)) in tw.iter().enumerate() {
                                let gval = gi[[i, j, l]];
                                d[[t0, h0, w0]] += gval * (1.0 - ft) * (1.0 - fh) * (1.0 - fw);
                                d[[t0, h0, w1]] += gval * (1.0 - ft) * (1.0 - fh) * fw;
                                d[[t0, h1, w0]] += gval * (1.0 - ft) * fh * (1.0 - fw);
                                d[[t0, h1, w1]] += gval * (1.0 - ft) * fh * fw;
                                d[[t1, h0, w0]] += gval * ft * (1.0 - fh) * (1.0 - fw);
                                d[[t1, h0, w1]] += gval * ft * (1.0 - fh) * fw;
                                d[[t1, h1, w0]] += gval * ft * fh * (1.0 - fw);
                                d[[t1, h1, w1]] += gval * ft * fh * fw;
                            }
                        }
                    }
                });
        }
        vec![Some(dx)]
    })
}

//! Adaptive average pooling over the (T, H, W) axes of a rank-5 tensor.
//! Bin edges follow the floor/ceil convention, so exact divisors give plain
//! block means.

use ndarray::{Axis, IxDyn, Zip};

use crate::graph::make_op;
use crate::{Arr, Var};

#[inline]
fn bin(i: usize, n_in: usize, n_out: usize) -> (usize, usize) {
    let s = (i * n_in) / n_out;
    let e = ((i + 1) * n_in).div_ceil(n_out);
    (s, e)
}

pub fn adaptive_avg_pool3d(x: &Var, out_sz: (usize, usize, usize)) -> Var {
    let xs = x.shape().to_vec();
    assert_eq!(xs.len(), 5, "adaptive_avg_pool3d expects rank 5");
    let (b, c, t, h, w) = (xs[0], xs[1], xs[2], xs[3], xs[4]);
    let (ot, oh, ow) = out_sz;
    assert!(ot >= 1 && oh >= 1 && ow >= 1);
    assert!(ot <= t && oh <= h && ow <= w, "adaptive pool cannot upsample");

    let xv = x
        .value()
        .view()
        .into_shape_with_order((b * c, t, h, w))
        .unwrap();
    let mut out = Arr::zeros(IxDyn(&[b, c, ot, oh, ow]));
    {
        let mut ov = out.view_mut().into_shape_with_order((b * c, ot, oh, ow)).unwrap();
        Zip::from(ov.axis_iter_mut(Axis(0)))
            .and(xv.axis_iter(Axis(0)))
            .par_for_each(|mut o, xi| {
                for i in 0..ot {
                    let (ts, te) = bin(i, t, ot);
                    for j in 0..oh {
                        let (hs, he) = bin(j, h, oh);
                        for l in 0..ow {
                            let (ws, we) = bin(l, w, ow);
                            let mut acc = 0.0;
                            for ti in ts..te {
                                for hi in hs..he {
                                    for wi in ws..we {
                                        acc += xi[[ti, hi, wi]];
                                    }
                                }
                            }
                            let count = ((te - ts) * (he - hs) * (we - ws)) as f64;
                            o[[i, j, l]] = acc / count;
                        }
                    }
                }
            });
    }

    let in_shape = xs.clone();
    make_op(&[x], out, move |g| {
        let (b, c) = (in_shape[0], in_shape[1]);
        let (t, h, w) = (in_shape[2], in_shape[3], in_shape[4]);
        let gv = g.view().into_shape_with_order((b * c, ot, oh, ow)).unwrap();
        let mut dx = Arr::zeros(IxDyn(&in_shape));
        {
            let mut dv = dx.view_mut().into_shape_with_order((b * c, t, h, w)).unwrap();
            Zip::from(dv.axis_iter_mut(Axis(0)))
                .and(gv.axis_iter(Axis(0)))
                .par_for_each(|mut d, gi| {
                    for i in 0..ot {
                        let (ts, te) = bin(i, t, ot);
                        for j in 0..oh {
                            let (hs, he) = bin(j, h, oh);
                            for l in 0..ow {
                                let (ws, we) = bin(l, w, ow);
                                let count = ((te - ts) * (he - hs) * (we - ws)) as f64;
                                let share = gi[[i, j, l]] / count;
                                for ti in ts..te {
                                    for hi in hs..he {
                                        for wi in ws..we {
                                            d[[ti, hi, wi]] += share;
                                        }
                                    }
                                }
                            }
                        }
                    }
                });
        }
        vec![Some(dx)]
    })
}
